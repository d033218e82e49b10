//! Attention block on eNVM and SRAM tiles, and the effect of overlapping the
//! V write with QK^T and softmax.
//!
//!     cargo run --release --example transformer_mapping

use cimsim::config::SimulationConfig;
use cimsim::hwperf::{attention_core_latency, build_chip, estimate_average};
use cimsim::netgraph::{fidelity, run_cim};
use cimsim::tensorio::{synth_model, NetworkDesc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let heads = 2;
    let bundle = synth_model(4, &NetworkDesc::tiny_attention(heads))?;
    let net = bundle.network()?;
    let mut cfg = SimulationConfig::example();
    cfg.quant.weight_bits = 6;
    cfg.quant.input_bits = 6;

    let plan = build_chip(&net, &cfg)?;
    println!("{:<14}{:<9}{:<7}{:>8}{:>8}{:>10}", "unit", "kind", "tile", "copies", "arrays", "MACs");
    for s in &plan.stages {
        let tile = s.tile_kind.map_or("-".to_string(), |k| format!("{k:?}"));
        println!("{:<14}{:<9}{:<7}{:>8}{:>8}{:>10}", s.unit, format!("{:?}", s.kind), tile, s.copies, s.subarrays, s.macs);
    }

    let run = run_cim(&net, &bundle.inputs, &cfg)?;
    println!("\nfidelity {:.3} over {} inputs", fidelity(&run.outputs, &bundle.labels)?, bundle.num_inputs());

    for overlap in [false, true] {
        cfg.arch.v_write_overlap = overlap;
        let plan = build_chip(&net, &cfg)?;
        let core = attention_core_latency(&plan, "attn").expect("attention layer");
        let report = estimate_average(&plan, &run.stats)?;
        println!(
            "V-write overlap {overlap:<5}: attention core {core:.4e} s, inference {:.4e} s, {:.4} TOPS",
            report.latency_s, report.metrics.tops
        );
    }
    Ok(())
}
