//! Seeded synthetic corpora: library catalogs, API maps, apps with known
//! call graphs, and device populations.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::apk::{ApkBuilder, Method};
use crate::dex::{ClassSpec, DexBuilder, Insn, Invoke, MethodSig, MethodSpec};
use crate::manifest::{self, BinaryOptions, PlainOptions};
use crate::Rng;

#[derive(Debug, Clone)]
pub struct Library {
    pub id: String,
    pub prefix: String,
    pub category: &'static str,
    pub network: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Api {
    pub method: MethodSig,
    pub permissions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Universe {
    pub libraries: Vec<Library>,
    pub apis: Vec<Api>,
    /// Framework calls with no mapping.
    pub plain_calls: Vec<MethodSig>,
    /// Permissions an app may declare, dangerous or not.
    pub permissions: Vec<String>,
}

fn lib(id: &str, prefix: &str, category: &'static str, network: Option<&str>) -> Library {
    Library {
        id: id.into(),
        prefix: prefix.into(),
        category,
        network: network.map(str::to_string),
    }
}

fn api(class: &str, name: &str, params: &[&str], ret: &str, perms: &[&str]) -> Api {
    Api {
        method: MethodSig::new(class, name, params, ret),
        permissions: perms.iter().map(|p| format!("android.permission.{p}")).collect(),
    }
}

pub fn standard_universe() -> Universe {
    let libraries = vec![
        lib("alpha-ads", "com.alphaads", "ad", Some("alpha")),
        lib("alpha-mediation", "com.alphaads.mediation", "ad", Some("alpha")),
        lib("beta-ads", "net.betamob.sdk", "ad", None),
        lib("gamma-ads", "io.gammaclick", "ad", Some("gamma")),
        lib("share-kit", "com.sharekit", "social", None),
        lib("metrics", "org.metrics.core", "analytics", None),
        lib("ioutil", "org.ioutil", "utility", None),
    ];
    let apis = vec![
        api("Landroid/location/LocationManager;", "getLastKnownLocation", &["Ljava/lang/String;"], "Landroid/location/Location;", &["ACCESS_FINE_LOCATION", "ACCESS_COARSE_LOCATION"]),
        api("Landroid/location/LocationManager;", "requestLocationUpdates", &["Ljava/lang/String;", "J", "F", "Landroid/location/LocationListener;"], "V", &["ACCESS_FINE_LOCATION"]),
        api("Landroid/telephony/TelephonyManager;", "getDeviceId", &[], "Ljava/lang/String;", &["READ_PHONE_STATE"]),
        api("Landroid/telephony/TelephonyManager;", "getLine1Number", &[], "Ljava/lang/String;", &["READ_PHONE_STATE", "READ_SMS"]),
        api("Landroid/hardware/Camera;", "open", &[], "Landroid/hardware/Camera;", &["CAMERA"]),
        api("Landroid/media/AudioRecord;", "startRecording", &[], "V", &["RECORD_AUDIO"]),
        api("Landroid/accounts/AccountManager;", "getAccounts", &[], "[Landroid/accounts/Account;", &["GET_ACCOUNTS"]),
        api("Landroid/telephony/SmsManager;", "sendTextMessage", &["Ljava/lang/String;", "Ljava/lang/String;", "Ljava/lang/String;", "Landroid/app/PendingIntent;", "Landroid/app/PendingIntent;"], "V", &["SEND_SMS"]),
        api("Landroid/provider/CalendarContract;", "query", &["Landroid/net/Uri;"], "Landroid/database/Cursor;", &["READ_CALENDAR"]),
        api("Landroid/provider/ContactsContract;", "query", &["Landroid/net/Uri;"], "Landroid/database/Cursor;", &["READ_CONTACTS"]),
        api("Landroid/hardware/SensorManager;", "registerBodySensor", &["I"], "Z", &["BODY_SENSORS"]),
        api("Landroid/net/wifi/WifiManager;", "getConnectionInfo", &[], "Landroid/net/wifi/WifiInfo;", &["ACCESS_WIFI_STATE"]),
        api("Ljava/net/URL;", "openConnection", &[], "Ljava/net/URLConnection;", &["INTERNET"]),
        api("Landroid/os/Environment;", "getExternalStorageDirectory", &[], "Ljava/io/File;", &["WRITE_EXTERNAL_STORAGE", "READ_EXTERNAL_STORAGE"]),
    ];
    let plain_calls = vec![
        MethodSig::new("Ljava/lang/StringBuilder;", "append", &["Ljava/lang/String;"], "Ljava/lang/StringBuilder;"),
        MethodSig::new("Ljava/lang/Object;", "<init>", &[], "V"),
        MethodSig::new("Landroid/util/Log;", "d", &["Ljava/lang/String;", "Ljava/lang/String;"], "I"),
        MethodSig::new("Ljava/util/List;", "size", &[], "I"),
    ];
    let mut permissions: BTreeSet<String> = apis.iter().flat_map(|a| a.permissions.iter().cloned()).collect();
    permissions.insert("android.permission.VIBRATE".into());
    permissions.insert("android.permission.CALL_PHONE".into());
    Universe {
        libraries,
        apis,
        plain_calls,
        permissions: permissions.into_iter().collect(),
    }
}

impl Universe {
    pub fn catalog_tsv(&self) -> String {
        let mut out = String::from("# prefix\tlibrary\tcategory\tnetwork\n");
        for l in &self.libraries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                l.prefix,
                l.id,
                l.category,
                l.network.as_deref().unwrap_or("")
            ));
        }
        out
    }

    pub fn permission_map_tsv(&self) -> String {
        let mut out = String::from("# api-level: 25\n");
        for a in &self.apis {
            for p in &a.permissions {
                out.push_str(&format!("{}\t{}\t{}\t{}\n", p, a.method.class, a.method.name, a.method.descriptor()));
            }
        }
        out
    }

    pub fn library(&self, id: &str) -> &Library {
        self.libraries.iter().find(|l| l.id == id).expect("known library")
    }
}

fn class_descriptor(package: &str, simple: &str) -> String {
    format!("L{}/{};", package.replace('.', "/"), simple)
}

#[derive(Debug, Clone)]
pub struct PlannedClass {
    pub descriptor: String,
    /// Library owning the class, or `None` for app code.
    pub library: Option<String>,
    /// Indices into `Universe::apis` invoked somewhere in the class.
    pub api_calls: Vec<usize>,
    pub body: Vec<MethodSpec>,
}

#[derive(Debug, Clone)]
pub struct AppPlan {
    pub package: String,
    pub declared: BTreeSet<String>,
    pub target_sdk: Option<i32>,
    pub min_sdk: Option<i32>,
    pub classes: Vec<PlannedClass>,
    pub dex_count: usize,
    pub binary_manifest: bool,
}

impl AppPlan {
    /// Libraries with at least one class in the app.
    pub fn libraries(&self) -> BTreeSet<String> {
        self.classes.iter().filter_map(|c| c.library.clone()).collect()
    }

    /// Permissions the code of each owner maps to, before any filtering.
    pub fn demanded(&self, u: &Universe) -> BTreeMap<Option<String>, BTreeSet<String>> {
        let mut out: BTreeMap<Option<String>, BTreeSet<String>> = BTreeMap::new();
        for c in &self.classes {
            let entry = out.entry(c.library.clone()).or_default();
            for &a in &c.api_calls {
                entry.extend(u.apis[a].permissions.iter().cloned());
            }
        }
        out
    }

    pub fn manifest_element(&self) -> manifest::Element {
        let perms: Vec<&str> = self.declared.iter().map(String::as_str).collect();
        manifest::manifest(&self.package, &perms, self.target_sdk, self.min_sdk)
    }

    pub fn dex_payloads(&self) -> Vec<Vec<u8>> {
        let mut builders = vec![DexBuilder::new(); self.dex_count.max(1)];
        for (i, c) in self.classes.iter().enumerate() {
            let b = &mut builders[i % self.dex_count.max(1)];
            b.classes.push(ClassSpec::new(&c.descriptor, c.body.clone()));
        }
        builders.iter().map(|b| b.build().bytes).collect()
    }

    pub fn apk(&self) -> Vec<u8> {
        let root = self.manifest_element();
        let manifest = if self.binary_manifest {
            manifest::pack_binary(&root, &BinaryOptions::default())
        } else {
            manifest::render_plain(&root, &PlainOptions::default()).into_bytes()
        };
        ApkBuilder::new()
            .manifest(manifest)
            .dex_payloads(self.dex_payloads())
            .entry_with("res/raw/blob.bin", vec![0u8; 64], Method::Stored)
            .build()
    }
}

fn random_body(rng: &mut Rng, u: &Universe, calls: &[usize]) -> Vec<Insn> {
    let mut body = Vec::new();
    let fillers = [0x12u8, 0x13, 0x1a, 0x22, 0x0a, 0x90, 0xd8, 0x38, 0x52, 0x01];
    let push_filler = |rng: &mut Rng, body: &mut Vec<Insn>| {
        for _ in 0..rng.gen_range(0..3) {
            body.push(Insn::op(*fillers.choose(rng).unwrap()));
        }
    };
    for &a in calls {
        push_filler(rng, &mut body);
        let m = u.apis[a].method.clone();
        let kind = *Invoke::ALL.choose(rng).unwrap();
        if rng.gen_bool(0.3) {
            body.push(Insn::invoke_range(kind, m, rng.gen_range(0..8), 2));
        } else {
            body.push(Insn::invoke(kind, m, &[0, 1]));
        }
    }
    if rng.gen_bool(0.5) {
        let m = u.plain_calls.choose(rng).unwrap().clone();
        body.push(Insn::invoke(Invoke::Virtual, m, &[0]));
    }
    if rng.gen_bool(0.2) {
        body.push(Insn::PackedSwitch {
            reg: 0,
            first_key: 0,
            targets: vec![3, 3],
        });
    }
    body.push(Insn::return_void());
    body
}

/// One random app. Library classes live under the library prefix; app
/// classes under the package.
pub fn random_app(rng: &mut Rng, u: &Universe, index: usize) -> AppPlan {
    let package = format!("com.synth.app{index:04}");
    let mut classes = Vec::new();
    let mut owners: Vec<(Option<String>, String)> = vec![(None, package.clone())];
    let n_libs = rng.gen_range(0..=u.libraries.len().min(4));
    for l in u.libraries.choose_multiple(rng, n_libs) {
        owners.push((Some(l.id.clone()), l.prefix.clone()));
    }
    for (owner, prefix) in owners {
        for k in 0..rng.gen_range(1..=2) {
            let descriptor = class_descriptor(&prefix, &format!("C{k}"));
            let n_calls = rng.gen_range(0..=3);
            let api_calls: Vec<usize> = (0..n_calls).map(|_| rng.gen_range(0..u.apis.len())).collect();
            let body = vec![
                MethodSpec::new("run", &[], "V", random_body(rng, u, &api_calls)),
                MethodSpec::new("<init>", &[], "V", vec![Insn::return_void()]).direct(),
            ];
            classes.push(PlannedClass {
                descriptor,
                library: owner.clone(),
                api_calls,
                body,
            });
        }
    }
    let declared: BTreeSet<String> = u
        .permissions
        .iter()
        .filter(|_| rng.gen_bool(0.4))
        .cloned()
        .collect();
    let target_sdk = if rng.gen_bool(0.1) { None } else { Some(rng.gen_range(16..=28)) };
    AppPlan {
        package,
        declared,
        target_sdk,
        min_sdk: Some(14),
        classes,
        dex_count: rng.gen_range(1..=2),
        binary_manifest: rng.gen_bool(0.7),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceSpec {
    pub id: String,
    pub installed: BTreeSet<String>,
    pub usage: Vec<(u32, String)>,
}

impl DeviceSpec {
    pub fn jsonl_line(&self) -> String {
        let installed: Vec<String> = self.installed.iter().map(|a| format!("\"{a}\"")).collect();
        let usage: Vec<String> = self.usage.iter().map(|(d, a)| format!("[{d},\"{a}\"]")).collect();
        format!(
            "{{\"device_id\":\"{}\",\"installed\":[{}],\"usage\":[{}]}}",
            self.id,
            installed.join(","),
            usage.join(",")
        )
    }
}

pub fn devices_jsonl(devices: &[DeviceSpec]) -> String {
    devices.iter().map(|d| d.jsonl_line() + "\n").collect()
}

/// Devices drawing installs from `apps`; each usage event names an
/// installed app on a day below `days`.
pub fn random_population(rng: &mut Rng, apps: &[String], devices: usize, max_apps: usize, days: u32) -> Vec<DeviceSpec> {
    (0..devices)
        .map(|i| {
            let n = rng.gen_range(0..=max_apps.min(apps.len()));
            let installed: BTreeSet<String> = apps.choose_multiple(rng, n).cloned().collect();
            let list: Vec<&String> = installed.iter().collect();
            let mut usage = Vec::new();
            if !list.is_empty() && days > 0 {
                for _ in 0..rng.gen_range(0..=2 * list.len()) {
                    usage.push((rng.gen_range(0..days), list.choose(rng).unwrap().to_string()));
                }
            }
            DeviceSpec {
                id: format!("dev{i:03}"),
                installed,
                usage,
            }
        })
        .collect()
}
