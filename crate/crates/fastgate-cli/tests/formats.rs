use fastgate::gatescheme::Impulse;
use fastgate_cli::config::RunConfig;
use fastgate_cli::output::{num, to_json, Record};
use fastgate_cli::schedule::{FragSection, ScheduleFile};
use proptest::prelude::*;

fn config(kappa: f64, q: f64, eta: f64, n: u32, seed: u64) -> RunConfig {
    let text = format!(
        "[trap]\nkind = \"paul\"\nspecies = \"Ca40\"\nkappa = {kappa:?}\nq = {q:?}\nsecular_frequency_hz = 1e6\n\
         [laser]\neta = {eta:?}\n[gate]\nn = {n}\n[optimizer]\nseed = {seed}\n\
         [sweep]\nparameter = \"chi_error\"\n"
    );
    RunConfig::from_toml(&text, "generated").unwrap()
}

proptest! {
    #[test]
    fn numbers_print_in_full_precision(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = num(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn records_round_trip_bit_identically(
        kappa in 0.05f64..0.5,
        q in 0.0f64..0.5,
        eta in 0.01f64..0.4,
        n in 1u32..60,
        seed in any::<u64>(),
        payload in prop::collection::vec(-1e30f64..1e30, 0..8),
    ) {
        let cfg = config(kappa, q, eta, n, seed);
        let rec = Record::new("sweep", &cfg, &["a", "b"], payload);
        let text = to_json(&rec);
        let back: Record<Vec<f64>> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &rec);
        prop_assert_eq!(to_json(&back), text);
    }

    #[test]
    fn schedules_round_trip(
        tau in prop::array::uniform3(1e-6f64..5.0),
        n in 1u32..100,
        phi in -10.0f64..10.0,
    ) {
        let s = ScheduleFile { phi_rf: phi, frag: Some(FragSection { tau, n }), impulses: vec![] };
        let back = ScheduleFile::parse(&s.to_toml(), "generated").unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn impulse_lists_round_trip(
        kicks in prop::collection::vec((-3.0f64..3.0, -20.0f64..20.0), 1..12),
        phi in 0.0f64..6.3,
    ) {
        let impulses: Vec<Impulse> = kicks.iter().map(|&(time, count)| Impulse { time, count }).collect();
        let s = ScheduleFile { phi_rf: phi, frag: None, impulses };
        let back = ScheduleFile::parse(&s.to_toml(), "generated").unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn derived_frequency_follows_beta() {
    let cfg = config(0.2, 0.2, 0.1, 12, 1);
    let t = &cfg.trap;
    assert!((t.secular_frequency_hz - 0.5 * t.beta * t.rf_frequency_hz).abs() < 1e-6);
    let text = "[trap]\nkind = \"paul\"\nspecies = \"Ca40\"\nkappa = 0.2\nq = 0.2\nrf_frequency_hz = 1.4e7\n";
    let cfg = RunConfig::from_toml(text, "inline").unwrap();
    assert!((cfg.trap.secular_frequency_hz - 0.5 * cfg.trap.beta * 1.4e7).abs() < 1e-6);
}

#[test]
fn wavelength_gives_the_physical_lamb_dicke_parameter() {
    let text = "[trap]\nkind = \"microtrap\"\nspecies = \"Ca40\"\nseparation = 1e-4\nq = 0.2\nsecular_frequency_hz = 1e6\n[laser]\nwavelength_nm = 397.0\n";
    let cfg = RunConfig::from_toml(text, "inline").unwrap();
    assert!((cfg.laser.eta - 0.178).abs() < 1e-3, "eta {}", cfg.laser.eta);
}

#[test]
fn field_specific_errors() {
    let cases = [
        ("kind = \"paul\"\nspecies = \"Ca40\"\nq = 0.2\nsecular_frequency_hz = 1e6", "trap.kappa"),
        ("kind = \"microtrap\"\nspecies = \"Ca40\"\nq = 0.2\nsecular_frequency_hz = 1e6", "trap.separation"),
        ("kind = \"paul\"\nspecies = \"Xx1\"\nkappa = 0.2\nq = 0.2\nsecular_frequency_hz = 1e6", "trap.species"),
        ("kind = \"paul\"\nspecies = \"Ca40\"\nkappa = 0.2\nq = 0.2\nmu = 1.2\nsecular_frequency_hz = 1e6", "trap.q"),
        ("kind = \"paul\"\nspecies = \"Ca40\"\nkappa = 0.2\nq = 0.2", "trap.secular_frequency_hz"),
    ];
    for (body, field) in cases {
        let e = RunConfig::from_toml(&format!("[trap]\n{body}\n"), "inline").unwrap_err().to_string();
        assert!(e.starts_with(field), "{field}: {e}");
    }
    let e = RunConfig::from_toml(
        "[trap]\nkind = \"paul\"\nspecies = \"Ca40\"\nkappa = 0.2\nq = 0.2\nsecular_frequency_hz = 1e6\n[sweep]\nparameter = \"rep_rate\"\ngrid = [3.0, 1.0]\n",
        "inline",
    )
    .unwrap_err()
    .to_string();
    assert!(e.starts_with("sweep.grid"), "{e}");
}

#[test]
fn schedule_rejects_mixed_forms() {
    let text = "phi_rf = 0.0\n[frag]\ntau = [0.1, 0.2, 0.3]\nn = 2\n[[impulse]]\ntime = 0.0\ncount = 1.0\n";
    assert!(ScheduleFile::parse(text, "inline").is_err());
}
