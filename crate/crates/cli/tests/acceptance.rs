//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line; the
//! process exits nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use ilc_core::attribution::{analyze_parsed, AnalysisContext, ApiPermissionMap, AppAnalysis, DangerousPermissionList, LibraryCatalog};
use ilc_core::device::{Corpus, DeviceProfile};
use ilc_core::dex::{extract_invocations, parse_dex, WalkWarning};
use ilc_core::ilc::{analyze_device, PopulationAnalysis, PopulationFilter};
use ilc_core::leakage::{summarize_leakage, LeakageOptions};
use ilc_core::longitudinal::{format_pct_change, LongitudinalReport};
use ilc_core::manifest::{parse_manifest, ManifestInfo};
use ilc_testkit::dex::{fixture_suite, Insn, Invoke};
use ilc_testkit::manifest::{pack_binary, reference_cases, render_plain, BinaryOptions, PlainOptions};
use ilc_testkit::synth::{devices_jsonl, random_app, random_population, standard_universe, Universe};
use ilc_testkit::{seeded, Rng};
use rand::Rng as _;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn app(id: &str, libs: &[(&str, &[&str])]) -> AppAnalysis {
    AppAnalysis {
        app_id: id.into(),
        version_label: String::new(),
        declared: libs.iter().flat_map(|(_, p)| p.iter().map(|x| x.to_string())).collect(),
        target_sdk: None,
        library_perms: libs.iter().map(|(l, p)| (l.to_string(), set(p))).collect(),
        app_code_perms: BTreeSet::new(),
        libraries_present: libs.iter().map(|(l, _)| l.to_string()).collect(),
    }
}

fn corpus_of(apps: Vec<AppAnalysis>) -> Corpus {
    apps.into_iter().map(|a| (a.app_id.clone(), a)).collect()
}

fn context(u: &Universe) -> AnalysisContext {
    AnalysisContext::new(
        LibraryCatalog::parse(&u.catalog_tsv()).unwrap(),
        ApiPermissionMap::parse(&u.permission_map_tsv(), "synthetic").unwrap(),
        DangerousPermissionList::android_6(),
    )
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let corpus = corpus_of(vec![
        app("app1", &[("library-1", &["A"]), ("library-2", &["A", "B"])]),
        app("app2", &[("library-2", &["A", "C"])]),
        app("app3", &[("library-2", &["F"])]),
    ]);
    let device = DeviceProfile::installed_only("phone", ["app1", "app2", "app3"].map(String::from)).unwrap();
    let result = analyze_device(&device, &corpus);
    let elapsed = start.elapsed();
    let f = result
        .findings
        .iter()
        .find(|f| f.library_id == "library-2")
        .ok_or("no finding for library-2")?;
    ensure!(f.union_set == set(&["A", "B", "C", "F"]), "union {:?}", f.union_set);
    ensure!(f.union_set.len() == 4 && f.single_app_max == 2 && f.additional == 2 && f.benefits, "{f:?}");
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("union 4, single-app max 2, additional 2, benefits in {elapsed:?}"))
}

fn criterion_2() -> Outcome {
    let table4 = [
        ("0", 53.8, 43.2, -19.7),
        ("1", 24.7, 21.3, -13.8),
        ("2", 12.5, 16.4, 31.2),
        ("3", 5.6, 10.1, 80.4),
        ("4", 2.1, 5.3, 152.4),
        ("5+", 1.3, 3.7, 184.6),
    ];
    let table5 = [("1", 86.5, 68.5, -20.8), ("2+", 13.5, 31.5, 133.3)];
    let mut worst: f64 = 0.0;
    for table in [&table4[..], &table5[..]] {
        let report = LongitudinalReport::from_shares("m", "OLD", "NEW", 0, table.iter().map(|(b, o, n, _)| (*b, *o, *n)));
        for (bucket, _, _, published) in table {
            let row = report.row(bucket).ok_or(format!("missing bucket {bucket}"))?;
            let shown = format_pct_change(row.pct_change);
            let value: f64 = shown.trim_end_matches('%').parse().map_err(|_| format!("unparsable {shown}"))?;
            let err = (value - published).abs();
            worst = worst.max(err);
            ensure!(err <= 0.05 + 1e-12, "bucket {bucket}: {shown} vs {published}");
        }
    }
    Ok(format!("8 rows, worst deviation {worst:.3} points"))
}

/// Random population for the brute-force comparison.
struct World {
    corpus: Corpus,
    devices: Vec<DeviceProfile>,
    libs: Vec<String>,
    /// (app, library) -> usable permissions, as plain vectors
    grants: Vec<(String, String, Vec<String>)>,
    installs: Vec<(String, Vec<String>)>,
}

fn random_world(rng: &mut Rng) -> World {
    let perms: Vec<String> = (0..rng.gen_range(1..=6)).map(|i| format!("DANGEROUS_{i}")).collect();
    let libs: Vec<String> = (0..rng.gen_range(1..=4)).map(|i| format!("lib.{i}")).collect();
    let n_apps = rng.gen_range(1..=12);
    let mut grants = Vec::new();
    let mut apps = Vec::new();
    for a in 0..n_apps {
        let id = format!("app{a}");
        let mut binding: Vec<(&str, Vec<&str>)> = Vec::new();
        for l in &libs {
            if rng.gen_bool(0.6) {
                let p: Vec<&str> = perms.iter().filter(|_| rng.gen_bool(0.4)).map(String::as_str).collect();
                grants.push((id.clone(), l.clone(), p.iter().map(|s| s.to_string()).collect()));
                binding.push((l, p));
            }
        }
        let refs: Vec<(&str, &[&str])> = binding.iter().map(|(l, p)| (*l, p.as_slice())).collect();
        apps.push(app(&id, &refs));
    }
    let mut devices = Vec::new();
    let mut installs = Vec::new();
    for d in 0..rng.gen_range(1..=10) {
        let mut installed: Vec<String> = Vec::new();
        for _ in 0..rng.gen_range(0..=8) {
            let id = if rng.gen_bool(0.1) { "not-in-corpus".to_string() } else { format!("app{}", rng.gen_range(0..n_apps)) };
            if !installed.contains(&id) {
                installed.push(id);
            }
        }
        let id = format!("dev{d}");
        devices.push(DeviceProfile::installed_only(id.clone(), installed.clone()).unwrap());
        installs.push((id, installed));
    }
    World { corpus: corpus_of(apps), devices, libs, grants, installs }
}

/// (device, library, hosts, union, max, additional)
type Row = (String, String, Vec<String>, Vec<String>, usize, usize);

fn brute_force(w: &World) -> Vec<Row> {
    let mut rows = Vec::new();
    for (dev, installed) in &w.installs {
        let mut libs = w.libs.clone();
        libs.sort();
        for lib in &libs {
            let mut hosts = Vec::new();
            let mut union: Vec<String> = Vec::new();
            let mut max = 0;
            for (a, l, p) in &w.grants {
                if l == lib && installed.contains(a) {
                    hosts.push(a.clone());
                    max = max.max(p.len());
                    for x in p {
                        if !union.contains(x) {
                            union.push(x.clone());
                        }
                    }
                }
            }
            if hosts.is_empty() {
                continue;
            }
            hosts.sort();
            union.sort();
            let additional = union.len() - max;
            rows.push((dev.clone(), lib.clone(), hosts, union, max, additional));
        }
    }
    rows
}

fn check_world(w: &World) -> Result<(), String> {
    let pa = PopulationAnalysis::new(&w.devices, &w.corpus);
    let mut got: Vec<Row> = pa
        .findings()
        .map(|f| {
            let mut hosts = f.hosting_apps.clone();
            hosts.sort();
            (f.device_id.clone(), f.library_id.clone(), hosts, f.union_set.iter().cloned().collect(), f.single_app_max, f.additional)
        })
        .collect();
    got.sort();
    let mut want = brute_force(w);
    want.sort();
    ensure!(got == want, "findings differ:\n{got:?}\n{want:?}");
    ensure!(pa.findings().all(|f| f.benefits == (f.additional > 0)), "benefits flag");

    let mut per_device: BTreeMap<&str, usize> = w.installs.iter().map(|(d, _)| (d.as_str(), 0)).collect();
    let mut additional = Vec::new();
    for r in want.iter().filter(|r| r.5 > 0) {
        *per_device.get_mut(r.0.as_str()).unwrap() += 1;
        additional.push(r.5);
    }
    let dist = pa.benefiting_count_distribution(PopulationFilter::All).map_err(|e| e.to_string())?;
    for (i, row) in dist.rows.iter().enumerate() {
        let n = per_device.values().filter(|&&c| c.min(5) == i).count() as u64;
        ensure!(row.count == n, "bucket {} count {} vs {n}", row.bucket, row.count);
    }
    if let Ok(d) = pa.additional_perm_distribution() {
        for (i, row) in d.rows.iter().enumerate() {
            let n = additional.iter().filter(|&&a| a.min(5) == i + 1).count() as u64;
            ensure!(row.count == n, "additional bucket {} count {} vs {n}", row.bucket, row.count);
        }
    } else {
        ensure!(additional.is_empty(), "engine reports no benefiting findings");
    }
    let mut per_lib: BTreeMap<String, u64> = BTreeMap::new();
    for r in want.iter().filter(|r| r.5 > 0) {
        *per_lib.entry(r.1.clone()).or_default() += 1;
    }
    ensure!(pa.library_benefit_counts() == per_lib, "library benefit counts");
    Ok(())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded(0x11c);
    let mut findings = 0;
    for i in 0..1000 {
        let w = random_world(&mut rng);
        findings += brute_force(&w).len();
        check_world(&w).map_err(|e| format!("population {i}: {e}"))?;
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("1000 populations, {findings} findings identical in {elapsed:?}"))
}

fn criterion_4() -> Outcome {
    let mut covered: BTreeSet<String> = BTreeSet::new();
    let mut methods = 0;
    let mut calls = 0;
    for b in fixture_suite() {
        for class in &b.classes {
            methods += class.methods.len();
            for insn in class.methods.iter().flat_map(|m| m.body.iter().flatten()) {
                covered.insert(match insn {
                    Insn::Invoke { kind, .. } => kind.label(false),
                    Insn::InvokeRange { kind, .. } => kind.label(true),
                    Insn::InvokePolymorphic { range, .. } => format!("polymorphic{}", if *range { "/range" } else { "" }),
                    Insn::InvokeCustom { range, .. } => format!("custom{}", if *range { "/range" } else { "" }),
                    Insn::PackedSwitch { .. } => "packed-switch-payload".into(),
                    Insn::SparseSwitch { .. } => "sparse-switch-payload".into(),
                    Insn::FillArrayData { .. } => "fill-array-data-payload".into(),
                    _ => continue,
                });
            }
        }
        let dex = b.build();
        let mut want: BTreeMap<(String, String, u32), usize> = BTreeMap::new();
        for e in &dex.expected {
            let callee = format!("{}->{}{}", e.callee.class, e.callee.name, e.callee.descriptor());
            *want.entry((e.caller_class.clone(), format!("{callee} {}", e.kind), e.offset)).or_default() += 1;
        }
        let parsed = parse_dex(&dex.bytes).map_err(|e| e.to_string())?;
        let ex = extract_invocations(&parsed);
        let mut got: BTreeMap<(String, String, u32), usize> = BTreeMap::new();
        for r in &ex.records {
            *got.entry((r.caller_class.clone(), format!("{} {}", r.callee, r.invoke_kind.as_str()), r.offset)).or_default() += 1;
        }
        ensure!(got == want, "extracted multiset differs from assembler source");
        ensure!(
            ex.warnings.iter().all(|w| matches!(w, WalkWarning::SkippedCallSite { .. })) && ex.warnings.len() == dex.call_sites,
            "unexpected warnings {:?}",
            ex.warnings
        );
        calls += want.values().sum::<usize>();
    }
    let mut required: BTreeSet<String> = Invoke::ALL.iter().flat_map(|k| [k.label(false), k.label(true)]).collect();
    required.extend(["polymorphic", "polymorphic/range", "custom", "custom/range"].map(String::from));
    required.extend(["packed-switch-payload", "sparse-switch-payload", "fill-array-data-payload"].map(String::from));
    let missing: Vec<&String> = required.difference(&covered).collect();
    ensure!(missing.is_empty(), "suite does not cover {missing:?}");
    ensure!(methods >= 50, "only {methods} methods");
    Ok(format!("{methods} methods, {calls} invocations, {} instruction forms, 100% match", required.len()))
}

fn criterion_5() -> Outcome {
    let mut pairs = 0;
    for (tree, e) in reference_cases() {
        let want = ManifestInfo {
            package: e.package,
            declared_permissions: e.permissions,
            target_sdk: e.target_sdk,
            min_sdk: e.min_sdk,
        };
        let plain = parse_manifest(render_plain(&tree, &PlainOptions::default()).as_bytes()).map_err(|e| e.to_string())?;
        for opts in [BinaryOptions::default(), BinaryOptions { utf8: true, strip_attr_names: true, hex_ints: true }] {
            let binary = parse_manifest(&pack_binary(&tree, &opts)).map_err(|e| e.to_string())?;
            ensure!(plain == binary, "{}: plaintext {plain:?} vs binary {binary:?}", want.package);
            pairs += 1;
        }
        ensure!(plain == want, "{}: parsed {plain:?}", want.package);
    }
    ensure!(pairs >= 10, "only {pairs} pairs");
    Ok(format!("{pairs} (plaintext, binary) pairs identical"))
}

fn criterion_6() -> Outcome {
    let u = standard_universe();
    let ctx = context(&u);
    let mut rng = seeded(0xa77);
    let mut checked_sets = 0;
    for i in 0..1000 {
        let plan = random_app(&mut rng, &u, i);
        let dexes: Vec<_> = plan.dex_payloads().iter().map(|b| parse_dex(b).unwrap()).collect();
        let info = ManifestInfo {
            package: plan.package.clone(),
            declared_permissions: plan.declared.clone(),
            target_sdk: None,
            min_sdk: None,
        };
        let base = analyze_parsed("", &info, &dexes, &ctx).analysis;
        let allowed: BTreeSet<&String> = info.declared_permissions.iter().filter(|p| ctx.dangerous.contains(p)).collect();
        for usable in base.library_perms.values().chain([&base.app_code_perms]) {
            ensure!(usable.iter().all(|p| allowed.contains(p)), "fixture {i}: {usable:?} escapes declared ∩ dangerous");
            checked_sets += 1;
        }
        let mut more = info.clone();
        for _ in 0..rng.gen_range(1..=5) {
            more.declared_permissions.insert(u.permissions[rng.gen_range(0..u.permissions.len())].clone());
        }
        let grown = analyze_parsed("", &more, &dexes, &ctx).analysis;
        ensure!(grown.libraries_present == base.libraries_present, "fixture {i}: library set changed");
        for (lib, usable) in &base.library_perms {
            ensure!(usable.is_subset(&grown.library_perms[lib]), "fixture {i}: {lib} lost permissions");
        }
        ensure!(base.app_code_perms.is_subset(&grown.app_code_perms), "fixture {i}: app code lost permissions");
    }
    Ok(format!("1000 fixtures, {checked_sets} usable sets contained, monotone under augmentation"))
}

fn criterion_7() -> Outcome {
    let corpus = corpus_of(vec![
        app("app1", &[("X", &["LOC"]), ("Y", &["CAM"]), ("Z", &["LOC"])]),
        app("app2", &[("X", &["LOC"]), ("W", &[])]),
        app("app3", &[("Z", &["MIC"])]),
    ]);
    let catalog = LibraryCatalog::parse("com.x\tX\tad\tn1\ncom.y\tY\tad\tn2\ncom.w\tW\tad\tn1\ncom.z\tZ\tanalytics\n").unwrap();
    let usage = |events: &[(i64, &str)]| events.iter().map(|(d, a)| (*d, a.to_string())).collect::<Vec<_>>();
    let devices = vec![
        // day 0: X, Y (n1, n2); day 1: X (n1) -> 3/2 leaks, 3/2 networks
        DeviceProfile::new("a", ["app1", "app2"].map(String::from), usage(&[(0, "app1"), (1, "app2")])).unwrap(),
        // day 0: X, Y, X (n1, n2); day 2: nothing; day 5: X (n1) -> 4/3 leaks, 3/3 networks
        DeviceProfile::new(
            "b",
            ["app1", "app2", "app3"].map(String::from),
            usage(&[(0, "app1"), (0, "app2"), (2, "app3"), (5, "app2")]),
        )
        .unwrap(),
    ];
    let want_leaks = (3.0 / 2.0 + 4.0 / 3.0) / 2.0;
    let want_networks = (3.0 / 2.0 + 1.0) / 2.0;
    let s = summarize_leakage(&devices, &corpus, &catalog, &LeakageOptions::default()).map_err(|e| e.to_string())?;
    ensure!((s.mean_leaks_per_device_day - want_leaks).abs() <= 1e-9, "leaks/day {}", s.mean_leaks_per_device_day);
    ensure!(
        (s.mean_distinct_networks_per_device_day - want_networks).abs() <= 1e-9,
        "networks/day {}",
        s.mean_distinct_networks_per_device_day
    );
    ensure!(s.max_leaks_any_device_day == 3, "max {}", s.max_leaks_any_device_day);

    let mut stripped = corpus.clone();
    for a in stripped.values_mut() {
        a.declared.clear();
        a.library_perms.values_mut().for_each(BTreeSet::clear);
    }
    let z = summarize_leakage(&devices, &stripped, &catalog, &LeakageOptions::default()).map_err(|e| e.to_string())?;
    ensure!(
        z.mean_leaks_per_device_day == 0.0 && z.mean_distinct_networks_per_device_day == 0.0 && z.max_leaks_any_device_day == 0,
        "zero-permission corpus leaks {z:?}"
    );
    Ok(format!(
        "leaks/day {:.6} (hand {want_leaks:.6}), networks/day {:.6} (hand {want_networks:.6}), zero-permission corpus 0",
        s.mean_leaks_per_device_day, s.mean_distinct_networks_per_device_day
    ))
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }
}

fn write_corpus(n: usize, seed: u64) -> (Fixture, Vec<String>) {
    let u = standard_universe();
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("corpus")).unwrap();
    fs::write(dir.path().join("catalog.tsv"), u.catalog_tsv()).unwrap();
    fs::write(dir.path().join("map.tsv"), u.permission_map_tsv()).unwrap();
    let mut rng = seeded(seed);
    let mut ids = Vec::new();
    for i in 0..n {
        let plan = random_app(&mut rng, &u, i);
        fs::write(dir.path().join("corpus").join(format!("{}.apk", plan.package)), plan.apk()).unwrap();
        ids.push(plan.package);
    }
    (Fixture { dir }, ids)
}

fn cli(args: &[&str]) -> i32 {
    ilc_cli::run(std::iter::once("ilc").chain(args.iter().copied()))
}

fn analyze_args<'a>(paths: &'a [String; 4], jobs: &'a str) -> Vec<&'a str> {
    vec![
        "--jobs", jobs, "analyze", "--corpus", &paths[0], "--out", &paths[1], "--catalog", &paths[2], "--permission-map", &paths[3],
    ]
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let (f, ids) = write_corpus(80, 0xde7);
    // a corrupt archive and a pre-extracted analysis in the same corpus
    fs::write(f.dir.path().join("corpus/broken.apk"), b"PK\x03\x04 truncated").unwrap();
    fs::write(
        f.dir.path().join("corpus/extracted.json"),
        serde_json::to_string(&app("com.extracted", &[("alphaads", &["android.permission.CAMERA"])])).unwrap(),
    )
    .unwrap();
    let mut apps = ids.clone();
    apps.push("com.extracted".into());
    let devices = random_population(&mut seeded(0xde8), &apps, 200, 12, 0);
    fs::write(f.dir.path().join("devices.jsonl"), devices_jsonl(&devices)).unwrap();

    let mut trees = Vec::new();
    for jobs in ["1", "8"] {
        let snap = f.path(&format!("snap-{jobs}"));
        let tables = f.path(&format!("tables-{jobs}"));
        let paths = [f.path("corpus"), snap.clone(), f.path("catalog.tsv"), f.path("map.tsv")];
        let code = cli(&analyze_args(&paths, jobs));
        ensure!(code == 0, "analyze --jobs {jobs} exited {code}");
        let devices = f.path("devices.jsonl");
        let code = cli(&["--jobs", jobs, "ilc", "--snapshot", &snap, "--devices", &devices, "--out", &tables]);
        ensure!(code == 0, "ilc --jobs {jobs} exited {code}");
        let mut files = tree_bytes(Path::new(&snap));
        files.extend(tree_bytes(Path::new(&tables)).into_iter().map(|(k, v)| (format!("tables/{k}"), v)));
        trees.push(files);
    }
    ensure!(trees[0].keys().eq(trees[1].keys()), "different file sets");
    for (name, bytes) in &trees[0] {
        ensure!(&trees[1][name] == bytes, "{name} differs between --jobs 1 and --jobs 8");
    }
    let size: usize = trees[0].values().map(Vec::len).sum();
    Ok(format!("{} files ({size} bytes) byte-identical for --jobs 1 and --jobs 8", trees[0].len()))
}

fn criterion_9() -> Outcome {
    let (f, _) = write_corpus(1000, 0x1000);
    let paths = [f.path("corpus"), f.path("snap"), f.path("catalog.tsv"), f.path("map.tsv")];
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get()).to_string();
    let start = Instant::now();
    let code = cli(&analyze_args(&paths, &jobs));
    let elapsed = start.elapsed();
    ensure!(code == 0, "analyze exited {code}");
    let index: serde_json::Value = serde_json::from_slice(&fs::read(f.dir.path().join("snap/index.json")).unwrap()).unwrap();
    let analyzed = index["apps"].as_array().map_or(0, Vec::len);
    ensure!(analyzed == 1000, "only {analyzed} apps analyzed");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("1000 APKs analyzed in {:.2} s on {jobs} threads", elapsed.as_secs_f64()))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "collusion example vector", criterion_1),
        (2, "percent-change arithmetic", criterion_2),
        (3, "engine equals brute force", criterion_3),
        (4, "invocation extraction fidelity", criterion_4),
        (5, "manifest cross-form equivalence", criterion_5),
        (6, "usable-set containment and monotonicity", criterion_6),
        (7, "leakage hand fixture", criterion_7),
        (8, "end-to-end determinism", criterion_8),
        (9, "desk-scale throughput", criterion_9),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut stdout = std::io::stdout();
    for (n, name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let line = match outcome {
            Ok(detail) => format!("PASS criterion {n}: {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                format!("FAIL criterion {n}: {name}: {reason}")
            }
        };
        writeln!(stdout, "{line}").unwrap();
    }
    writeln!(stdout, "acceptance: {} passed, {failed} failed", 9 - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
