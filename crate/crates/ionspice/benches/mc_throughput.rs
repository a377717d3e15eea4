//! Monte Carlo throughput: sequential executor vs the rayon pool, on the
//! DC ensemble of a five-gate OR chain and on a short transient ensemble.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ionspice::circuits::{chain, drive_port, ChainDrive, GateTopology};
use ionspice::engine::{Integrator, SignalRef, TransientSpec};
use ionspice::exec::Executor;
use ionspice::model::DiodeParams;
use ionspice::stochastic::{monte_carlo, McAnalysis, McConfig, VariationSpec};

fn executors() -> Vec<(&'static str, Executor)> {
    let mut list = vec![("sequential", Executor::Sequential)];
    #[cfg(feature = "parallel")]
    list.push(("rayon", Executor::Rayon));
    list
}

fn chain_template() -> (ionspice::Circuit, String) {
    let p = DiodeParams::default();
    let (mut template, ports) =
        chain(5, &GateTopology::or(), ChainDrive::TieSecondInputLow, &p).unwrap();
    drive_port(&mut template, "Vin", "in", 1.0);
    let out = ports.node("out").unwrap().to_string();
    (template, out)
}

fn bench_dc_ensemble(c: &mut Criterion) {
    let (template, out) = chain_template();
    let variation = VariationSpec::around_nominal(&DiodeParams::default(), 0.4, 0.4, 42, 64);
    let mut group = c.benchmark_group("mc_dc_chain5_64runs");
    for (name, executor) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &executor, |b, &executor| {
            let config = McConfig {
                executor,
                ..McConfig::dc(vec![SignalRef::NodeVoltage(out.clone())])
            };
            b.iter(|| {
                criterion::black_box(monte_carlo(&template, &variation, &config).unwrap())
            });
        });
    }
    group.finish();
}

fn bench_transient_ensemble(c: &mut Criterion) {
    let (template, out) = chain_template();
    let variation = VariationSpec::around_nominal(&DiodeParams::default(), 0.4, 0.4, 7, 16);
    let mut group = c.benchmark_group("mc_tran_chain5_16runs");
    group.sample_size(20);
    for (name, executor) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &executor, |b, &executor| {
            let config = McConfig {
                executor,
                analysis: McAnalysis::Transient(TransientSpec {
                    t_end: 2.0,
                    dt: 0.05,
                    integrator: Integrator::BackwardEuler,
                    from_rest: false,
                    force_dt: false,
                }),
                ..McConfig::dc(vec![SignalRef::NodeVoltage(out.clone())])
            };
            b.iter(|| {
                criterion::black_box(monte_carlo(&template, &variation, &config).unwrap())
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_dc_ensemble, bench_transient_ensemble);
criterion_main!(benches);
