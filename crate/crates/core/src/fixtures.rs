//! Synthetic applications with known ground truth.
//!
//! An [`AppFixture`] lists the records its APK must yield and renders the
//! APK bytes (zip, binary manifest, dex), an strace log and a pcap. A
//! corpus is described by a line-based spec:
//!
//! ```text
//! # comments start with '#'
//! seed 7
//! noise api count=20 rate=0.3
//! group mal count=100 label=malware
//! api android.telephony.SmsManager.getDeviceId()Ljava/lang/String; rate=0.9
//! permission android.permission.SEND_SMS
//! app demo label=benign
//! url https://example.com/
//! syscall openat
//! host example.com
//! ```
//!
//! `app NAME` starts a single application and `group PREFIX count=N` starts
//! `N` applications named `PREFIX-000`, `PREFIX-001`, ... Item lines
//! (`permission`, `feature`, `component`, `intent`, `api`, `url`,
//! `syscall`, `host`, `multidex`) belong to the latest block and are drawn
//! per application with probability `rate` (default 1). `noise KIND` adds
//! `count` generated values of that kind, to every block when written
//! before the first block and to the current block otherwise.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::apk::axml::{write_axml, XmlElement};
use crate::apk::dex::{ClassDef, DexBuilder, Insn, MethodDef};
use crate::apk::is_network_address;
use crate::apk::method::{MethodRef, PlatformPrefixes};
use crate::apk::zip::{Method, ZipWriter};
use crate::apk::MANIFEST;
use crate::label::Label;
use crate::report::{FeatureKind, FeatureRecord};
use crate::trace::pcap::{PcapWriter, LINKTYPE_ETHERNET, TCP_ACK, TCP_FIN, TCP_PSH, TCP_SYN};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("fixture spec line {line}: {reason}")]
pub struct SpecError {
    pub line: usize,
    pub reason: String,
}

/// The process id of the application in generated traces.
pub const TRACE_PID: u32 = 4242;
pub const DEVICE_ADDR: Ipv4Addr = Ipv4Addr::new(10, 0, 2, 15);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppFixture {
    pub name: String,
    pub label: Label,
    pub package: String,
    pub permissions: BTreeSet<String>,
    pub hardware: BTreeSet<String>,
    /// Fully qualified component class names.
    pub components: BTreeSet<String>,
    /// Intent-filter actions, attached to the first component.
    pub intents: BTreeSet<String>,
    pub api_calls: BTreeSet<MethodRef>,
    pub urls: BTreeSet<String>,
    /// Syscalls issued by the application after its first `openat`.
    pub syscalls: Vec<String>,
    pub hosts: Vec<String>,
    /// Splits the code over `classes.dex` and `classes2.dex`.
    pub multidex: bool,
}

fn package_for(name: &str) -> String {
    let tail: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    format!("com.fixture.a{tail}")
}

impl AppFixture {
    pub fn new(name: &str, label: Label) -> Self {
        AppFixture {
            name: name.to_string(),
            label,
            package: package_for(name),
            permissions: BTreeSet::new(),
            hardware: BTreeSet::new(),
            components: BTreeSet::new(),
            intents: BTreeSet::new(),
            api_calls: BTreeSet::new(),
            urls: BTreeSet::new(),
            syscalls: Vec::new(),
            hosts: Vec::new(),
            multidex: false,
        }
    }

    /// Intent filters need a host component; one is added if missing.
    fn normalize(&mut self) {
        if !self.intents.is_empty() && self.components.is_empty() {
            self.components
                .insert(format!("{}.MainActivity", self.package));
        }
    }

    /// Records static extraction must produce from [`AppFixture::apk_bytes`].
    pub fn expected_records(&self) -> BTreeSet<FeatureRecord> {
        let mut out = BTreeSet::new();
        let mut add = |k, v: &str| {
            out.insert(FeatureRecord::new(k, v).expect("validated fixture value"));
        };
        self.permissions
            .iter()
            .for_each(|v| add(FeatureKind::RequestedPermission, v));
        self.hardware
            .iter()
            .for_each(|v| add(FeatureKind::HardwareComponent, v));
        self.components
            .iter()
            .for_each(|v| add(FeatureKind::AppComponent, v));
        self.intents
            .iter()
            .for_each(|v| add(FeatureKind::FilteredIntent, v));
        self.api_calls
            .iter()
            .for_each(|m| add(FeatureKind::ApiCall, &m.to_string()));
        self.urls
            .iter()
            .for_each(|v| add(FeatureKind::NetworkAddress, v));
        out
    }

    fn manifest(&self) -> XmlElement {
        let mut root = XmlElement::new("manifest").attr(false, "package", &self.package);
        for p in &self.permissions {
            root = root.child(XmlElement::new("uses-permission").attr(true, "name", p));
        }
        for h in &self.hardware {
            root = root.child(XmlElement::new("uses-feature").attr(true, "name", h));
        }
        let mut app = XmlElement::new("application").attr(true, "label", &self.name);
        for (i, c) in self.components.iter().enumerate() {
            let mut el = XmlElement::new(if i % 2 == 0 { "activity" } else { "service" })
                .attr(true, "name", c);
            if i == 0 && !self.intents.is_empty() {
                let mut filter = XmlElement::new("intent-filter");
                for a in &self.intents {
                    filter = filter.child(XmlElement::new("action").attr(true, "name", a));
                }
                el = el.child(filter);
            }
            app = app.child(el);
        }
        root.child(app)
    }

    fn dex_files(&self) -> Vec<Vec<u8>> {
        let apis: Vec<&MethodRef> = self.api_calls.iter().collect();
        let urls: Vec<&String> = self.urls.iter().collect();
        let body = |apis: &[&MethodRef], urls: &[&String]| {
            let mut b: Vec<Insn> = apis
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    if i % 2 == 0 {
                        Insn::InvokeStatic((*m).clone())
                    } else {
                        Insn::InvokeVirtual((*m).clone())
                    }
                })
                .collect();
            b.extend(urls.iter().map(|u| Insn::ConstString {
                reg: 0,
                value: (*u).clone(),
            }));
            b.push(Insn::ReturnVoid);
            b
        };
        let class = |name: &str, run: Vec<Insn>| ClassDef {
            name: format!("{}.{name}", self.package),
            methods: vec![
                MethodDef {
                    name: "init".into(),
                    body: vec![Insn::Const4 { reg: 0, value: 1 }, Insn::ReturnVoid],
                },
                MethodDef {
                    name: "run".into(),
                    body: run,
                },
            ],
        };
        if self.multidex {
            let (a1, a2) = apis.split_at(apis.len() / 2);
            let (u1, u2) = urls.split_at(urls.len() / 2);
            [("Main", a1, u1), ("Extra", a2, u2)]
                .into_iter()
                .map(|(n, a, u)| DexBuilder::new().class(class(n, body(a, u))).build())
                .collect()
        } else {
            vec![DexBuilder::new()
                .class(class("Main", body(&apis, &urls)))
                .build()]
        }
    }

    pub fn apk_bytes(&self) -> Vec<u8> {
        let mut z = ZipWriter::new();
        z.add(MANIFEST, &write_axml(&self.manifest()), Method::Deflated);
        for (i, dex) in self.dex_files().iter().enumerate() {
            let name = if i == 0 {
                "classes.dex".to_string()
            } else {
                format!("classes{}.dex", i + 1)
            };
            z.add(&name, dex, Method::Deflated);
        }
        z.add("res/raw/about.txt", self.name.as_bytes(), Method::Stored);
        z.finish()
    }

    /// Syscall names the app's process tree issues, in order.
    pub fn expected_syscalls(&self) -> Vec<String> {
        let mut v = vec!["openat".to_string()];
        v.extend(self.syscalls.iter().cloned());
        v
    }

    /// `strace -f -tt` style log with an unrelated process interleaved.
    pub fn strace_text(&self) -> String {
        let mut out = String::new();
        let mut t = 0u32;
        let mut line = |pid: u32, body: &str| {
            t += 1;
            out.push_str(&format!("{pid} 10:00:00.{t:06} {body}\n"));
        };
        line(1, "getpid() = 1");
        line(
            TRACE_PID,
            &format!(
                "openat(AT_FDCWD, \"/data/data/{}/files\", O_RDONLY) = 3",
                self.package
            ),
        );
        for (i, s) in self.syscalls.iter().enumerate() {
            if i % 3 == 2 {
                line(TRACE_PID, &format!("{s}(3, 0x7f00 <unfinished ...>"));
                line(1, "getuid() = 0");
                line(TRACE_PID, &format!("<... {s} resumed>) = 0"));
            } else {
                line(TRACE_PID, &format!("{s}(3) = 0"));
            }
        }
        line(1, "exit_group(0) = ?");
        out
    }

    /// One HTTP GET per host over its own TCP connection.
    pub fn pcap_bytes(&self) -> Vec<u8> {
        let mut w = PcapWriter::new(LINKTYPE_ETHERNET);
        let mut ts = 1_000_000u64;
        for (i, host) in self.hosts.iter().enumerate() {
            let client = (DEVICE_ADDR, 40000 + i as u16);
            let server = (Ipv4Addr::new(93, 184, 216, 10 + (i % 200) as u8), 80);
            let req = format!(
                "GET /{}/{i} HTTP/1.1\r\nHost: {host}\r\nUser-Agent: fixture/1.0\r\n\r\n",
                self.package
            );
            let resp = b"HTTP/1.1 204 No Content\r\n\r\n";
            let mut step = |w: &mut PcapWriter, from, to, seq, flags, payload: &[u8]| {
                w.tcp(ts, from, to, seq, flags, payload);
                ts += 1500;
            };
            step(&mut w, client, server, 100, TCP_SYN, b"");
            step(&mut w, server, client, 900, TCP_SYN | TCP_ACK, b"");
            step(&mut w, client, server, 101, TCP_ACK, b"");
            step(
                &mut w,
                client,
                server,
                101,
                TCP_PSH | TCP_ACK,
                req.as_bytes(),
            );
            step(&mut w, server, client, 901, TCP_PSH | TCP_ACK, resp);
            step(
                &mut w,
                client,
                server,
                101 + req.len() as u32,
                TCP_FIN | TCP_ACK,
                b"",
            );
        }
        w.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub seed: u64,
    pub apps: Vec<AppFixture>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ItemKind {
    Permission,
    Feature,
    Component,
    Intent,
    Api,
    Url,
    Syscall,
    Host,
    Multidex,
}

impl ItemKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "permission" => ItemKind::Permission,
            "feature" => ItemKind::Feature,
            "component" => ItemKind::Component,
            "intent" => ItemKind::Intent,
            "api" => ItemKind::Api,
            "url" => ItemKind::Url,
            "syscall" => ItemKind::Syscall,
            "host" => ItemKind::Host,
            "multidex" => ItemKind::Multidex,
            _ => return None,
        })
    }

    fn noise_value(self, i: usize) -> Option<String> {
        Some(match self {
            ItemKind::Permission => format!("android.permission.FIXTURE_NOISE_{i}"),
            ItemKind::Feature => format!("android.hardware.fixture.noise{i}"),
            ItemKind::Component => format!("com.fixture.noise.Component{i}"),
            ItemKind::Intent => format!("android.intent.action.FIXTURE_NOISE_{i}"),
            ItemKind::Api => format!("android.fixture.Noise{i:02}.touch()V"),
            ItemKind::Url => format!("https://noise{i}.example.org/"),
            ItemKind::Syscall => format!("fixture_noise_{i}"),
            ItemKind::Host => format!("noise{i}.example.org"),
            ItemKind::Multidex => return None,
        })
    }
}

#[derive(Debug, Clone)]
struct Item {
    kind: ItemKind,
    value: String,
    rate: f64,
}

#[derive(Debug)]
struct Block {
    line: usize,
    names: Vec<String>,
    label: Label,
    items: Vec<Item>,
}

fn err(line: usize, reason: impl Into<String>) -> SpecError {
    SpecError {
        line,
        reason: reason.into(),
    }
}

fn options(line: usize, words: &[&str]) -> Result<Vec<(String, String)>, SpecError> {
    words
        .iter()
        .map(|w| {
            w.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| err(line, format!("expected key=value, found `{w}`")))
        })
        .collect()
}

fn opt<'a>(opts: &'a [(String, String)], key: &str) -> Option<&'a str> {
    opts.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn check_keys(line: usize, opts: &[(String, String)], allowed: &[&str]) -> Result<(), SpecError> {
    match opts.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(err(line, format!("unknown option `{k}`"))),
        None => Ok(()),
    }
}

fn parse_rate(line: usize, opts: &[(String, String)]) -> Result<f64, SpecError> {
    match opt(opts, "rate") {
        None => Ok(1.0),
        Some(v) => v
            .parse::<f64>()
            .ok()
            .filter(|r| (0.0..=1.0).contains(r))
            .ok_or_else(|| err(line, format!("rate must be in [0, 1], found `{v}`"))),
    }
}

fn validate(
    line: usize,
    kind: ItemKind,
    value: &str,
    prefixes: &PlatformPrefixes,
) -> Result<(), SpecError> {
    let ok = match kind {
        ItemKind::Api => value
            .parse::<MethodRef>()
            .is_ok_and(|m| m.is_platform(prefixes)),
        ItemKind::Url => is_network_address(value),
        ItemKind::Component => value.contains('.') && !value.starts_with('.'),
        ItemKind::Syscall => {
            value.starts_with(|c: char| c.is_ascii_lowercase() || c == '_')
                && value
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        }
        ItemKind::Host => {
            !value.is_empty() && value.is_ascii() && !value.contains(char::is_whitespace)
        }
        ItemKind::Multidex => true,
        _ => FeatureRecord::new(FeatureKind::RequestedPermission, value).is_ok(),
    };
    if ok {
        Ok(())
    } else {
        Err(err(line, format!("invalid value `{value}`")))
    }
}

/// Parses a corpus spec and draws every application.
pub fn parse_fixture_spec(text: &str) -> Result<Corpus, SpecError> {
    let prefixes = PlatformPrefixes::default();
    let mut seed = 0u64;
    let mut global: Vec<Item> = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut names = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        match words[0] {
            "seed" => {
                seed = words
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .filter(|_| words.len() == 2)
                    .ok_or_else(|| err(line, "expected `seed N`"))?;
            }
            "app" | "group" => {
                let name = words.get(1).ok_or_else(|| err(line, "missing name"))?;
                if name.contains('=') {
                    return Err(err(line, "missing name"));
                }
                let opts = options(line, &words[2..])?;
                let label: Label = opt(&opts, "label")
                    .ok_or_else(|| err(line, "missing label="))?
                    .parse()
                    .map_err(|_| err(line, "label must be benign or malware"))?;
                let block_names = if words[0] == "app" {
                    check_keys(line, &opts, &["label"])?;
                    vec![name.to_string()]
                } else {
                    check_keys(line, &opts, &["label", "count"])?;
                    let count: usize = opt(&opts, "count")
                        .and_then(|c| c.parse().ok())
                        .ok_or_else(|| err(line, "group needs count=N"))?;
                    let width = count.saturating_sub(1).to_string().len().max(3);
                    (0..count).map(|j| format!("{name}-{j:0width$}")).collect()
                };
                for n in &block_names {
                    if !names.insert(n.clone()) {
                        return Err(err(line, format!("duplicate app `{n}`")));
                    }
                }
                blocks.push(Block {
                    line,
                    names: block_names,
                    label,
                    items: Vec::new(),
                });
            }
            "noise" => {
                let kind = words
                    .get(1)
                    .and_then(|k| ItemKind::parse(k))
                    .filter(|k| *k != ItemKind::Multidex)
                    .ok_or_else(|| err(line, "unknown noise kind"))?;
                let opts = options(line, &words[2..])?;
                check_keys(line, &opts, &["count", "rate"])?;
                let count: usize = opt(&opts, "count")
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err(line, "noise needs count=N"))?;
                let rate = parse_rate(line, &opts)?;
                let items = (0..count)
                    .filter_map(|j| kind.noise_value(j))
                    .map(|value| Item { kind, value, rate });
                match blocks.last_mut() {
                    Some(b) => b.items.extend(items),
                    None => global.extend(items),
                }
            }
            w => {
                let kind = ItemKind::parse(w)
                    .ok_or_else(|| err(line, format!("unknown directive `{w}`")))?;
                let block = blocks
                    .last_mut()
                    .ok_or_else(|| err(line, "item outside an app or group"))?;
                let (value, rest) = if kind == ItemKind::Multidex {
                    (String::new(), &words[1..])
                } else {
                    let v = words.get(1).ok_or_else(|| err(line, "missing value"))?;
                    (v.to_string(), &words[2..])
                };
                validate(line, kind, &value, &prefixes)?;
                let opts = options(line, rest)?;
                check_keys(line, &opts, &["rate"])?;
                block.items.push(Item {
                    kind,
                    value,
                    rate: parse_rate(line, &opts)?,
                });
            }
        }
    }

    let mut apps = Vec::new();
    for block in &blocks {
        for name in &block.names {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(apps.len() as u64);
            let mut app = AppFixture::new(name, block.label);
            for item in global.iter().chain(&block.items) {
                if item.rate < 1.0 && !rng.gen_bool(item.rate) {
                    continue;
                }
                let v = item.value.clone();
                match item.kind {
                    ItemKind::Permission => {
                        app.permissions.insert(v);
                    }
                    ItemKind::Feature => {
                        app.hardware.insert(v);
                    }
                    ItemKind::Component => {
                        app.components.insert(v);
                    }
                    ItemKind::Intent => {
                        app.intents.insert(v);
                    }
                    ItemKind::Api => {
                        app.api_calls
                            .insert(v.parse().map_err(|_| err(block.line, "invalid api"))?);
                    }
                    ItemKind::Url => {
                        app.urls.insert(v);
                    }
                    ItemKind::Syscall => app.syscalls.push(v),
                    ItemKind::Host => app.hosts.push(v),
                    ItemKind::Multidex => app.multidex = true,
                }
            }
            app.normalize();
            apps.push(app);
        }
    }
    Ok(Corpus { seed, apps })
}

/// Ten platform methods used as class markers by the generated corpora.
pub fn marker_apis() -> Vec<String> {
    [
        "android.telephony.SmsManager.sendTextMessage(Ljava/lang/String;Ljava/lang/String;Ljava/lang/String;Landroid/app/PendingIntent;Landroid/app/PendingIntent;)V",
        "android.telephony.TelephonyManager.getDeviceId()Ljava/lang/String;",
        "android.telephony.TelephonyManager.getSubscriberId()Ljava/lang/String;",
        "android.content.pm.PackageManager.setComponentEnabledSetting(Landroid/content/ComponentName;II)V",
        "java.lang.Runtime.exec(Ljava/lang/String;)Ljava/lang/Process;",
        "dalvik.system.DexClassLoader.loadClass(Ljava/lang/String;)Ljava/lang/Class;",
        "android.app.admin.DevicePolicyManager.lockNow()V",
        "javax.crypto.Cipher.doFinal([B)[B",
        "android.location.LocationManager.getLastKnownLocation(Ljava/lang/String;)Landroid/location/Location;",
        "android.content.ContentResolver.delete(Landroid/net/Uri;Ljava/lang/String;[Ljava/lang/String;)I",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Spec of a balanced corpus: each malware app carries each marker API
/// with probability `marker_rate`, and both classes share noise APIs and
/// permissions.
pub fn marker_corpus_spec(per_class: usize, marker_rate: f64, seed: u64) -> String {
    let mut s =
        format!("seed {seed}\nnoise api count=30 rate=0.3\nnoise permission count=8 rate=0.4\n");
    s.push_str(&format!("group benign count={per_class} label=benign\n"));
    s.push_str("permission android.permission.INTERNET\napi java.lang.String.length()I rate=0.8\n");
    s.push_str("url https://cdn.example.com/assets rate=0.5\nsyscall read\nsyscall write rate=0.5\nhost cdn.example.com rate=0.5\n");
    s.push_str(&format!("group malware count={per_class} label=malware\n"));
    s.push_str("permission android.permission.INTERNET\napi java.lang.String.length()I rate=0.8\nsyscall read\n");
    for m in marker_apis() {
        s.push_str(&format!("api {m} rate={marker_rate}\n"));
    }
    s.push_str(
        "intent android.intent.action.BOOT_COMPLETED rate=0.7\nhost c2.example.net rate=0.5\n",
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apk::parse_apk_bytes;
    use crate::trace::flows::{http_features, tcp_features};
    use crate::trace::pcap::read_pcap;
    use crate::trace::strace::{parse_strace_text, TargetFilter};

    fn demo() -> AppFixture {
        let spec = "\
seed 3
app demo label=malware
permission android.permission.INTERNET
feature android.hardware.camera
component com.example.Main
intent android.intent.action.BOOT_COMPLETED
api java.lang.String.length()I
api android.telephony.TelephonyManager.getDeviceId()Ljava/lang/String;
url https://example.com/x
url 10.1.2.3
syscall read
syscall write
syscall futex
host example.com
multidex
";
        parse_fixture_spec(spec).unwrap().apps.remove(0)
    }

    #[test]
    fn apk_round_trip() {
        let app = demo();
        let report = parse_apk_bytes(&app.apk_bytes(), &PlatformPrefixes::default()).unwrap();
        assert_eq!(report.records, app.expected_records());
        assert_eq!(report.methods.len(), 4);
    }

    #[test]
    fn trace_and_capture() {
        let app = demo();
        let id = crate::AppId::of_bytes(b"demo");
        let t = parse_strace_text(
            &app.strace_text(),
            id,
            &TargetFilter::Package(app.package.clone()),
        )
        .unwrap();
        assert_eq!(t.names(), app.expected_syscalls());
        let cap = read_pcap(&app.pcap_bytes()).unwrap();
        assert_eq!(http_features(&cap)[0].host, "example.com");
        assert!(tcp_features(&cap, None).is_ok());
    }

    #[test]
    fn groups_and_errors() {
        let c = parse_fixture_spec(
            "group g count=12 label=benign\napi java.lang.Object.hashCode()I rate=0.5\n",
        )
        .unwrap();
        assert_eq!(c.apps.len(), 12);
        assert_eq!(c.apps[11].name, "g-011");
        assert_eq!(parse_fixture_spec("").unwrap().apps.len(), 0);
        let dup = parse_fixture_spec("app a label=benign\napp a label=malware\n").unwrap_err();
        assert_eq!(dup.line, 2);
        assert_eq!(
            parse_fixture_spec("api java.lang.String.length()I\n")
                .unwrap_err()
                .line,
            1
        );
        assert_eq!(
            parse_fixture_spec("app a label=benign\napi com.example.Own.x()V\n")
                .unwrap_err()
                .line,
            2
        );
        assert_eq!(
            parse_fixture_spec("app a label=maybe\n").unwrap_err().line,
            1
        );
    }

    #[test]
    fn marker_corpus_is_deterministic() {
        let spec = marker_corpus_spec(10, 0.9, 5);
        let a = parse_fixture_spec(&spec).unwrap();
        assert_eq!(a, parse_fixture_spec(&spec).unwrap());
        assert_eq!(a.apps.len(), 20);
        let markers: BTreeSet<MethodRef> =
            marker_apis().iter().map(|m| m.parse().unwrap()).collect();
        for app in &a.apps {
            let has = app.api_calls.iter().any(|m| markers.contains(m));
            if app.label == Label::Benign {
                assert!(!has);
            }
        }
    }
}
