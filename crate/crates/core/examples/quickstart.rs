//! Draw a teacher CNN, then compare software-quantized and CIM inference.
//!
//!     cargo run --release --example quickstart

use cimsim::config::{DeviceModel, SimulationConfig};
use cimsim::netgraph::{fidelity, run_cim, run_software};
use cimsim::tensorio::{synth_model, NetworkDesc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = synth_model(0, &NetworkDesc::tiny_cnn())?;
    let net = bundle.network()?;
    println!("{}: {} inputs, {} MACs per inference", bundle.desc.name, bundle.num_inputs(), net.macs_per_sample());

    let mut cfg = SimulationConfig::example();
    cfg.quant.weight_bits = 6;
    cfg.quant.input_bits = 6;

    let sw = run_software(&net, &bundle.inputs, &cfg.quant)?;
    println!("software {}-bit fidelity: {:.3}", cfg.quant.weight_bits, fidelity(&sw, &bundle.labels)?);

    for dev in [DeviceModel::ideal(), DeviceModel::rram_150(), DeviceModel::rram_17()] {
        cfg.device = DeviceModel { cell_bits_max: dev.cell_bits_max.max(cfg.mapping.cell_bits), ..dev };
        let run = run_cim(&net, &bundle.inputs, &cfg)?;
        println!(
            "cim on r={:<6} fidelity {:.3}",
            cfg.device.on_off_ratio.0,
            fidelity(&run.outputs, &bundle.labels)?
        );
    }
    Ok(())
}
