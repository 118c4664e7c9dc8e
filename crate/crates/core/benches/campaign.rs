use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uwb_guard::harness::{simulate_campaign, ScenarioConfig};
use uwb_guard::par::Execution;

fn scenario(execution: Execution) -> ScenarioConfig {
    let mut s = ScenarioConfig {
        trials: 16,
        execution,
        ..ScenarioConfig::default()
    };
    s.attack.enabled = true;
    s.frame.sts_segment_length = 8;
    s
}

fn campaign(c: &mut Criterion) {
    let mut g = c.benchmark_group("campaign_16_rounds");
    g.sample_size(10);
    for mode in [Execution::Sequential, Execution::Parallel] {
        let s = scenario(mode);
        g.bench_with_input(BenchmarkId::from_parameter(format!("{mode:?}")), &s, |b, s| {
            b.iter(|| simulate_campaign(s).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, campaign);
criterion_main!(benches);
