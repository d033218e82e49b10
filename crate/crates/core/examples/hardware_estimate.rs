//! Area, latency and energy from recorded traces and from layer statistics.
//!
//!     cargo run --release --example hardware_estimate

use std::time::Instant;

use cimsim::config::{DeviceModel, SimulationConfig};
use cimsim::hwperf::{build_chip, estimate_average, estimate_trace};
use cimsim::netgraph::run_cim;
use cimsim::tensorio::{synth_model, NetworkDesc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = synth_model(3, &NetworkDesc::tiny_cnn())?;
    let net = bundle.network()?;
    let mut cfg = SimulationConfig::example();
    cfg.device = DeviceModel::rram_17();

    let run = run_cim(&net, &bundle.inputs, &cfg)?;
    let plan = build_chip(&net, &cfg)?;

    let t0 = Instant::now();
    let trace = estimate_trace(&plan, &run.traces)?;
    let t_trace = t0.elapsed();
    let t0 = Instant::now();
    let average = estimate_average(&plan, &run.stats)?;
    let t_avg = t0.elapsed();

    print!("{}", average.render_text());
    println!();
    println!("{:<14}{:>14}{:>14}", "", "trace", "average");
    println!("{:<14}{:>14.6}{:>14.6}", "TOPS", trace.metrics.tops, average.metrics.tops);
    println!("{:<14}{:>14.6}{:>14.6}", "TOPS/W", trace.metrics.tops_per_w, average.metrics.tops_per_w);
    println!("{:<14}{:>14}{:>14}", "cost calls", trace.cost_model_calls, average.cost_model_calls);
    println!("{:<14}{:>14.2?}{:>14.2?}", "wall time", t_trace, t_avg);
    Ok(())
}
