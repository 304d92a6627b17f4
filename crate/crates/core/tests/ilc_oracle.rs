use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use ilc_core::attribution::AppAnalysis;
use ilc_core::device::{Corpus, DeviceProfile};
use ilc_core::ilc::{library_prevalence, Bucketing, IlcError, PopulationAnalysis, PopulationFilter};
use ilc_testkit::{seeded, Rng};
use rand::Rng as _;

const PERMS: [&str; 6] = ["P0", "P1", "P2", "P3", "P4", "P5"];

struct World {
    corpus: Corpus,
    devices: Vec<DeviceProfile>,
    /// app -> library -> permission bitmask, for present libraries only
    masks: BTreeMap<String, BTreeMap<String, u8>>,
    installed: Vec<(String, Vec<String>)>,
}

fn random_world(rng: &mut Rng) -> World {
    let n_libs = rng.gen_range(1..=4);
    let n_perms = rng.gen_range(1..=6);
    let n_apps = rng.gen_range(1..=12);
    let libs: Vec<String> = (0..n_libs).map(|i| format!("lib{i}")).collect();

    let mut corpus = Corpus::new();
    let mut masks = BTreeMap::new();
    for a in 0..n_apps {
        let id = format!("app{a:02}");
        let mut per_lib = BTreeMap::new();
        for l in &libs {
            if rng.gen_bool(0.5) {
                per_lib.insert(l.clone(), rng.gen_range(0u8..(1 << n_perms)));
            }
        }
        let set = |m: u8| -> BTreeSet<String> { (0..6).filter(|b| m >> b & 1 == 1).map(|b| PERMS[b].to_string()).collect() };
        let analysis = AppAnalysis {
            app_id: id.clone(),
            version_label: "v".into(),
            declared: BTreeSet::new(),
            target_sdk: None,
            library_perms: per_lib.iter().map(|(l, m)| (l.clone(), set(*m))).collect(),
            app_code_perms: BTreeSet::new(),
            libraries_present: per_lib.keys().cloned().collect(),
        };
        corpus.insert(id.clone(), analysis);
        masks.insert(id, per_lib);
    }

    let n_dev = rng.gen_range(1..=10);
    let mut devices = Vec::new();
    let mut installed = Vec::new();
    for d in 0..n_dev {
        let mut apps: BTreeSet<String> = BTreeSet::new();
        for _ in 0..rng.gen_range(0..=8) {
            if rng.gen_bool(0.1) {
                apps.insert(format!("unknown{}", rng.gen_range(0..3)));
            } else {
                apps.insert(format!("app{:02}", rng.gen_range(0..n_apps)));
            }
        }
        let id = format!("d{d}");
        installed.push((id.clone(), apps.iter().cloned().collect()));
        devices.push(DeviceProfile::installed_only(id, apps).unwrap());
    }
    World {
        corpus,
        devices,
        masks,
        installed,
    }
}

#[derive(Debug, PartialEq, Eq)]
struct OracleFinding {
    library: String,
    hosts: BTreeSet<String>,
    union: u8,
    max: u32,
    additional: u32,
}

fn oracle(w: &World) -> Vec<(String, Vec<OracleFinding>)> {
    let mut out = Vec::new();
    for (dev, apps) in &w.installed {
        let mut libs: BTreeSet<&String> = BTreeSet::new();
        for a in apps {
            if let Some(m) = w.masks.get(a) {
                libs.extend(m.keys());
            }
        }
        let mut findings = Vec::new();
        for lib in libs {
            let mut union = 0u8;
            let mut max = 0u32;
            let mut hosts = BTreeSet::new();
            for a in apps {
                if let Some(&m) = w.masks.get(a).and_then(|x| x.get(lib)) {
                    union |= m;
                    max = max.max(m.count_ones());
                    hosts.insert(a.clone());
                }
            }
            findings.push(OracleFinding {
                library: lib.clone(),
                hosts,
                union,
                max,
                additional: union.count_ones() - max,
            });
        }
        out.push((dev.clone(), findings));
    }
    out
}

fn mask_of(set: &BTreeSet<String>) -> u8 {
    set.iter().map(|p| 1u8 << PERMS.iter().position(|x| x == p).unwrap()).sum()
}

fn check_world(w: &World) {
    let pa = PopulationAnalysis::new(&w.devices, &w.corpus);
    let want = oracle(w);
    assert_eq!(pa.devices.len(), want.len());
    let mut benefiting_per_device = Vec::new();
    let mut additional = Vec::new();
    let mut lib_counts: BTreeMap<String, u64> = BTreeMap::new();
    for (d, (dev, findings)) in pa.devices.iter().zip(&want) {
        assert_eq!(&d.device_id, dev);
        let got: Vec<OracleFinding> = d
            .findings
            .iter()
            .map(|f| {
                assert_eq!(f.hosting_apps.len(), f.per_app_sets.len());
                assert_eq!(f.benefits, f.additional > 0);
                OracleFinding {
                    library: f.library_id.clone(),
                    hosts: f.hosting_apps.iter().cloned().collect(),
                    union: mask_of(&f.union_set),
                    max: f.single_app_max as u32,
                    additional: f.additional as u32,
                }
            })
            .collect();
        assert_eq!(&got, findings);
        let b: Vec<&OracleFinding> = findings.iter().filter(|f| f.additional > 0).collect();
        benefiting_per_device.push(b.len());
        for f in b {
            additional.push(f.additional as usize);
            *lib_counts.entry(f.library.clone()).or_default() += 1;
        }
    }

    let dist = pa.benefiting_count_distribution(PopulationFilter::All).unwrap();
    for (i, row) in dist.rows.iter().enumerate() {
        let n = benefiting_per_device.iter().filter(|&&c| c.min(5) == i).count() as u64;
        assert_eq!(row.count, n);
    }
    assert_eq!(dist.total, w.devices.len() as u64);

    match pa.additional_perm_distribution() {
        Ok(d) => {
            for (i, row) in d.rows.iter().enumerate() {
                let n = additional.iter().filter(|&&a| a.min(5) == i + 1).count() as u64;
                assert_eq!(row.count, n);
            }
            let coarse = pa.additional_perm_distribution_with(Bucketing::ADDITIONAL_PERMISSIONS_COARSE).unwrap();
            assert_eq!(coarse.rows[0].count, additional.iter().filter(|&&a| a == 1).count() as u64);
            assert_eq!(coarse.rows[1].count, additional.iter().filter(|&&a| a >= 2).count() as u64);
        }
        Err(e) => {
            assert_eq!(e, IlcError::NoBenefitingFindings);
            assert!(additional.is_empty());
        }
    }
    assert_eq!(pa.library_benefit_counts(), lib_counts);

    let libs_total: usize = want.iter().map(|(_, f)| f.len()).sum();
    let mean = pa.mean_libraries_per_device(PopulationFilter::All).unwrap();
    assert_eq!(mean, libs_total as f64 / w.devices.len() as f64);

    let prevalence = library_prevalence(&w.corpus).unwrap();
    for (lib, share) in prevalence {
        let n = w.masks.values().filter(|m| m.contains_key(&lib)).count();
        assert_eq!(share, n as f64 / w.corpus.len() as f64);
    }
}

#[test]
fn thousand_random_populations_match_brute_force() {
    let start = Instant::now();
    let mut rng = seeded(2024);
    for _ in 0..1000 {
        check_world(&random_world(&mut rng));
    }
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn device_order_does_not_change_findings() {
    let mut rng = seeded(5);
    for _ in 0..50 {
        let w = random_world(&mut rng);
        let forward = PopulationAnalysis::new(&w.devices, &w.corpus);
        let mut rev = w.devices.clone();
        rev.reverse();
        let backward = PopulationAnalysis::new(&rev, &w.corpus);
        let mut b = backward.devices.clone();
        b.reverse();
        assert_eq!(forward.devices, b);
    }
}

#[test]
fn union_is_insensitive_to_redundant_apps() {
    // adding an app whose usable set is a subset of another host's set
    // changes neither the union nor the maximum
    let mut rng = seeded(6);
    for _ in 0..200 {
        let mut w = random_world(&mut rng);
        let Some((app, masks)) = w.masks.iter().find(|(_, m)| !m.is_empty()).map(|(a, m)| (a.clone(), m.clone())) else {
            continue;
        };
        let mut clone_analysis = w.corpus[&app].clone();
        clone_analysis.app_id = "zz-clone".into();
        for (lib, set) in clone_analysis.library_perms.iter_mut() {
            let keep = masks[lib] & rng.gen::<u8>();
            *set = set.iter().filter(|p| keep >> PERMS.iter().position(|x| x == *p).unwrap() & 1 == 1).cloned().collect();
        }
        w.corpus.insert("zz-clone".into(), clone_analysis);
        let devices: Vec<DeviceProfile> = w
            .devices
            .iter()
            .map(|d| {
                let mut apps = d.installed().clone();
                if apps.contains(&app) {
                    apps.insert("zz-clone".into());
                }
                DeviceProfile::installed_only(d.device_id.clone(), apps).unwrap()
            })
            .collect();
        let before = PopulationAnalysis::new(&w.devices, &w.corpus);
        let after = PopulationAnalysis::new(&devices, &w.corpus);
        for (x, y) in before.devices.iter().zip(&after.devices) {
            for (f, g) in x.findings.iter().zip(&y.findings) {
                assert_eq!(f.union_set, g.union_set);
                assert_eq!(f.single_app_max, g.single_app_max);
            }
        }
    }
}

#[test]
fn empty_inputs() {
    let corpus = Corpus::new();
    assert_eq!(library_prevalence(&corpus), Err(IlcError::EmptyCorpus));
    assert_eq!(
        ilc_core::ilc::benefiting_count_distribution(&[], &corpus),
        Err(IlcError::EmptyPopulation)
    );
    let d = vec![DeviceProfile::installed_only("d", ["x".to_string()]).unwrap()];
    let pa = PopulationAnalysis::new(&d, &corpus);
    assert_eq!(pa.devices[0].unresolved_apps, 1);
    assert_eq!(pa.benefiting_count_distribution(PopulationFilter::WithResolvedApps), Err(IlcError::EmptyPopulation));
    assert_eq!(pa.benefiting_count_distribution(PopulationFilter::All).unwrap().share("0"), Some(1.0));
    assert_eq!(pa.library_benefit_shares(), Err(IlcError::NoBenefitingFindings));
}
