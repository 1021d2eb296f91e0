use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otoc_qsl::bath::stationary_kernel;
use otoc_qsl::exact::exact_average_otoc;
use otoc_qsl::harness::{simulate, ExperimentConfig};
use otoc_qsl::params::{ChainParams, ModelSign};
use otoc_qsl::redfield::{qsl_bounds, scrambling_rate};

fn random_params(rng: &mut impl Rng) -> ChainParams {
    let mut p = ChainParams::paper_default()
        .with_n(rng.gen_range(3..=7))
        .with_couplings(rng.gen_range(0.1..=1.0), rng.gen_range(-1.2..1.2), rng.gen_range(-0.8..0.8))
        .with_beta(rng.gen_range(0.0..2.0));
    if rng.gen_bool(0.5) {
        p.model = ModelSign::Antiferro;
    }
    p
}

#[test]
fn bound_series_start_at_one_and_never_increase() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..8 {
        let p = random_params(&mut rng);
        let grid = p.grid().unwrap();
        let exact = exact_average_otoc(&p, &grid).unwrap();
        let kernel = stationary_kernel(&p, &grid).unwrap();
        let b = qsl_bounds(&p, &kernel, &grid, &exact.otoc, None).unwrap();
        for s in [&b.bound_liouville, &b.bound_state_direct, &b.bound_state_relaxed] {
            assert_eq!(s[0], 1.0);
            assert!(s.windows(2).all(|w| w[1] <= w[0]), "{p:?}");
        }
        assert!(exact.otoc.iter().all(|&o| o >= 0.5 - 1e-10));
    }
}

#[test]
fn relaxed_bound_never_exceeds_direct_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..8 {
        let p = random_params(&mut rng);
        let grid = p.grid().unwrap();
        let exact = exact_average_otoc(&p, &grid).unwrap();
        let kernel = stationary_kernel(&p, &grid).unwrap();
        let b = qsl_bounds(&p, &kernel, &grid, &exact.otoc, None).unwrap();
        for n in 0..b.len() {
            assert!(b.bound_state_direct[n] >= b.bound_state_relaxed[n], "{p:?} at {n}");
        }
    }
}

#[test]
fn liouville_rate_dominates_exact_rate_at_paper_point() {
    let o = simulate(&ChainParams::paper_default(), &ExperimentConfig::default(), 0).unwrap();
    let mut s = o.series.clone();
    scrambling_rate(&mut s, o.params.state_bound_mode);
    let worst = s
        .rate_liouville
        .iter()
        .zip(&s.rate_exact)
        .map(|(l, e)| e - l)
        .fold(f64::NEG_INFINITY, f64::max);
    println!("max(rate_exact - rate_liouville) = {worst:.4}");
    assert!(worst <= 0.0, "rate_liouville falls below rate_exact by {worst}");
}

#[test]
fn weak_coupling_bound_stays_below_exact() {
    let mut report = Vec::new();
    for j in [0.1, 0.2, 0.3] {
        let mut p = ChainParams::paper_default();
        p.j = j;
        let o = simulate(&p, &ExperimentConfig::default(), 0).unwrap();
        let s = &o.series;
        let excess = (0..s.len())
            .filter(|&n| j * s.grid.t(n) <= 1.2 + 1e-9)
            .map(|n| s.bound_liouville[n] - s.otoc_exact[n])
            .fold(f64::NEG_INFINITY, f64::max);
        report.push((j, excess));
    }
    println!("max(bound_liouville - otoc_exact) by J: {report:?}");
    for (j, excess) in report {
        assert!(excess <= 0.02, "J = {j}: bound exceeds exact OTOC by {excess:.4}");
    }
}

#[test]
fn nonstationary_and_stationary_agree_without_coupling() {
    let mut p = ChainParams::paper_default().with_n(5);
    p.j = 0.0;
    p.dt = Some(0.02);
    p.t_max = Some(1.0);
    let st = simulate(&p, &ExperimentConfig::default(), 0).unwrap();
    p.bath_mode = otoc_qsl::params::BathMode::Nonstationary;
    let ns = simulate(&p, &ExperimentConfig::default(), 0).unwrap();
    assert_eq!(st.series.bound_liouville, ns.series.bound_liouville);
    assert!(st.series.otoc_redfield.iter().all(|&x| x == 1.0));
}

#[test]
fn n_sweep_early_times_coincide() {
    let runs: Vec<_> = [6, 8]
        .iter()
        .map(|&n| simulate(&ChainParams::paper_default().with_n(n), &ExperimentConfig::default(), 0).unwrap())
        .collect();
    let (a, b) = (&runs[0].series, &runs[1].series);
    for n in 0..a.len() {
        if 0.65 * a.grid.t(n) <= 0.5 {
            assert!((a.otoc_exact[n] - b.otoc_exact[n]).abs() < 0.01);
        }
    }
}
