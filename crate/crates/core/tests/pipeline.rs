use isspc_core::eval::evaluate;
use isspc_core::rng::{stream_rng, Stream};
use isspc_core::simgen::{generate, SimSpec, Variant};
use isspc_core::{run_isspc, DataMatrix, IsspcConfig, IsspcResult, SubsampleSize};
use proptest::prelude::*;
use rand::Rng;

fn small_design(seed: u64, noise: f64, variant: Variant) -> SimSpec {
    SimSpec { n: 1_500, p: 10, k: 4, noise_fraction: noise, variant, seed, ..SimSpec::default() }
}

fn cfg(seed: u64) -> IsspcConfig {
    IsspcConfig { seed, eta: Some(5), ..IsspcConfig::default() }
}

fn check_invariants(result: &IsspcResult, n: usize) {
    let partition = &result.partition;
    assert_eq!(partition.len(), n);
    let k = partition.num_clusters();
    assert_eq!(result.clusters.len(), k);

    // Labels are handed out in acceptance order without gaps or reuse.
    let accepted: Vec<usize> = result.traces.iter().flat_map(|t| t.accepted.iter().map(|c| c.label)).collect();
    assert_eq!(accepted, (1..=k).collect::<Vec<_>>());

    let sizes = partition.sizes();
    for trace in &result.traces {
        for c in &trace.accepted {
            assert_eq!(sizes[c.label], c.final_size);
            assert!(c.subsample_size <= c.final_size);
            assert!(c.significant_dims >= result.eta);
        }
        assert!(trace.subsample.windows(2).all(|w| w[0] < w[1]));
    }
    // Each iteration either accepts a cluster or is the last one.
    let last = result.traces.len().saturating_sub(1);
    for (b, trace) in result.traces.iter().enumerate() {
        assert!(b == last || !trace.accepted.is_empty());
    }
    if let Some(t) = result.traces.last() {
        assert_eq!(t.residual_noise, sizes[0]);
    }
}

#[test]
fn spherical_design_is_recovered() {
    let sim = generate(&small_design(9, 0.2, Variant::Spherical)).unwrap();
    let result = run_isspc(&sim.data, &cfg(1)).unwrap();
    check_invariants(&result, sim.data.nrows());
    let report = evaluate(&sim.truth, &result.partition).unwrap();
    assert!(report.ari_c.unwrap() > 0.9, "{report:?}");
    assert!(report.ari_n > 0.8, "{report:?}");
}

#[test]
fn correlated_clusters_may_split_but_stay_pure() {
    let sim = generate(&small_design(9, 0.2, Variant::Correlated)).unwrap();
    let result = run_isspc(&sim.data, &cfg(1)).unwrap();
    check_invariants(&result, sim.data.nrows());
    let report = evaluate(&sim.truth, &result.partition).unwrap();
    assert!(report.estimated_k >= report.true_k, "{report:?}");
    let counts = report.table.counts();
    for row in &counts[..report.estimated_k] {
        let total: u64 = row.iter().sum();
        let top = row.iter().max().copied().unwrap_or(0);
        assert!(top as f64 >= 0.95 * total as f64, "impure cluster {row:?}");
    }
}

#[test]
fn pure_noise_stops_early_with_no_clusters() {
    let (n, p) = (2_000, 10);
    let mut rng = stream_rng(3, Stream::Generator);
    let values = (0..n * p).map(|_| rng.random_range(-5.0..5.0)).collect();
    let y = DataMatrix::new(values, n, p).unwrap();
    let result = run_isspc(&y, &cfg(0)).unwrap();
    check_invariants(&result, n);
    assert_eq!(result.partition.num_clusters(), 0);
    assert!(result.traces.len() <= 2);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let sim = generate(&small_design(2, 0.3, Variant::Spherical)).unwrap();
    let a = run_isspc(&sim.data, &cfg(5)).unwrap();
    let b = run_isspc(&sim.data, &cfg(5)).unwrap();
    assert_eq!(a.partition, b.partition);
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.clusters, b.clusters);
}

#[test]
fn subsample_must_be_smaller_than_the_data() {
    let sim = generate(&small_design(2, 0.3, Variant::Spherical)).unwrap();
    let too_big = IsspcConfig { nu: SubsampleSize::Fixed(1_500), ..cfg(0) };
    assert!(matches!(run_isspc(&sim.data, &too_big), Err(isspc_core::Error::Config(_))));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn invariants_hold_across_designs(
        data_seed in 0u64..1_000,
        run_seed in 0u64..1_000,
        noise in 0.05f64..0.6,
        trim in prop_oneof![Just(0.0), 0.05f64..0.25],
    ) {
        let sim = generate(&small_design(data_seed, noise, Variant::Spherical)).unwrap();
        let config = IsspcConfig { trim_fraction: trim, ..cfg(run_seed) };
        let result = run_isspc(&sim.data, &config).unwrap();
        check_invariants(&result, sim.data.nrows());
    }
}
