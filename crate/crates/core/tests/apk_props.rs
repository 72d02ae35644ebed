use std::collections::BTreeSet;

use droidlens::apk::dex::DexFile;
use droidlens::apk::method::{MethodRef, PlatformPrefixes};
use droidlens::apk::zip::Archive;
use droidlens::apk::{dex_index, parse_apk_bytes};
use droidlens::fixtures::{marker_apis, AppFixture};
use droidlens::{FeatureReport, Label};
use proptest::prelude::*;

const PERMISSIONS: [&str; 6] = [
    "android.permission.INTERNET",
    "android.permission.READ_SMS",
    "android.permission.SEND_SMS",
    "android.permission.CAMERA",
    "android.permission.RECEIVE_BOOT_COMPLETED",
    "android.permission.ACCESS_FINE_LOCATION",
];
const HARDWARE: [&str; 3] = [
    "android.hardware.camera",
    "android.hardware.telephony",
    "android.hardware.wifi",
];
const INTENTS: [&str; 3] = [
    "android.intent.action.BOOT_COMPLETED",
    "android.intent.action.SMS_RECEIVED",
    "android.intent.action.MAIN",
];

fn pick<'a>(pool: &'a [&'a str], mask: u32) -> impl Iterator<Item = String> + 'a {
    pool.iter()
        .enumerate()
        .filter(move |(i, _)| mask & (1 << i) != 0)
        .map(|(_, s)| s.to_string())
}

prop_compose! {
    fn app()(
        perms in 0u32..64,
        hw in 0u32..8,
        n_components in 0usize..4,
        intents in 0u32..8,
        apis in 0u32..1024,
        n_urls in 0usize..4,
        multidex in any::<bool>(),
        malware in any::<bool>(),
        tag in 0u32..1000,
    ) -> AppFixture {
        let mut a = AppFixture::new(&format!("prop{tag}"), Label::from_bool(malware));
        a.permissions.extend(pick(&PERMISSIONS, perms));
        a.hardware.extend(pick(&HARDWARE, hw));
        for i in 0..n_components {
            a.components.insert(format!("{}.Component{i}", a.package));
        }
        a.intents.extend(pick(&INTENTS, intents));
        if !a.intents.is_empty() && a.components.is_empty() {
            a.components.insert(format!("{}.MainActivity", a.package));
        }
        let markers = marker_apis();
        let markers: Vec<&str> = markers.iter().map(String::as_str).collect();
        a.api_calls.extend(pick(&markers, apis).map(|m| m.parse::<MethodRef>().unwrap()));
        for i in 0..n_urls {
            a.urls.insert(format!("https://h{i}.example.org/p{tag}"));
        }
        a.multidex = multidex;
        a
    }
}

fn dex_files(apk: &[u8]) -> Vec<DexFile> {
    let archive = Archive::parse(apk).unwrap();
    let mut entries: Vec<_> = archive
        .entries()
        .iter()
        .filter_map(|e| dex_index(&e.name).map(|i| (i, e)))
        .collect();
    entries.sort_by_key(|(i, _)| *i);
    entries
        .into_iter()
        .map(|(_, e)| DexFile::parse(&archive.read(e).unwrap()).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parse_recovers_declared_records(a in app()) {
        let report = parse_apk_bytes(&a.apk_bytes(), &PlatformPrefixes::default()).unwrap();
        prop_assert_eq!(report.records, a.expected_records());
    }

    #[test]
    fn features_file_round_trips(a in app()) {
        let report = parse_apk_bytes(&a.apk_bytes(), &PlatformPrefixes::default()).unwrap();
        let back = FeatureReport::parse_features(&report.features_text()).unwrap();
        prop_assert_eq!(back, report.records.clone());
        prop_assert_eq!(FeatureReport::parse_opcodes(&report.opcodes_text()).unwrap(), report.methods.clone());
        prop_assert_eq!(FeatureReport::parse_api_counts(&report.api_counts_text()).unwrap(), report.api_counts);
    }

    #[test]
    fn opcode_count_is_conserved(a in app()) {
        let bytes = a.apk_bytes();
        let report = parse_apk_bytes(&bytes, &PlatformPrefixes::default()).unwrap();
        let total: usize = dex_files(&bytes).iter().map(DexFile::instruction_count).sum();
        prop_assert_eq!(report.opcode_sequence().len(), total);
    }

    #[test]
    fn parsing_is_deterministic(a in app()) {
        let bytes = a.apk_bytes();
        let r1 = parse_apk_bytes(&bytes, &PlatformPrefixes::default()).unwrap();
        let r2 = parse_apk_bytes(&bytes, &PlatformPrefixes::default()).unwrap();
        prop_assert_eq!(r1.features_text(), r2.features_text());
        prop_assert_eq!(r1.opcodes_text(), r2.opcodes_text());
        prop_assert_eq!(r1.api_counts_text(), r2.api_counts_text());
    }

    #[test]
    fn truncation_is_an_error(a in app(), cut in 0.0f64..1.0) {
        let bytes = a.apk_bytes();
        let at = (cut * bytes.len() as f64) as usize;
        prop_assert!(parse_apk_bytes(&bytes[..at], &PlatformPrefixes::default()).is_err());
    }

    #[test]
    fn mutation_errors_or_changes_nothing(a in app(), pos in 0.0f64..1.0, xor in 1u8..=255) {
        let mut bytes = a.apk_bytes();
        let original = parse_apk_bytes(&bytes, &PlatformPrefixes::default()).unwrap();
        let at = (pos * bytes.len() as f64) as usize;
        bytes[at] ^= xor;
        if let Ok(r) = parse_apk_bytes(&bytes, &PlatformPrefixes::default()) {
            prop_assert_eq!(r.records, original.records);
            prop_assert_eq!(r.methods, original.methods);
            prop_assert_eq!(r.api_counts, original.api_counts);
        }
    }
}

#[test]
fn empty_fixture_has_no_records() {
    let a = AppFixture::new("bare", Label::Benign);
    let report = parse_apk_bytes(&a.apk_bytes(), &PlatformPrefixes::default()).unwrap();
    assert_eq!(report.records, BTreeSet::new());
    assert_eq!(report.methods.len(), 2);
}
