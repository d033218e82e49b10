//! Finite on/off ratio and cell variation, with and without offset
//! cancellation.
//!
//!     cargo run --release --example on_off_ratio

use cimsim::config::{Design, DeviceModel, OffsetCancellation, SimulationConfig};
use cimsim::netgraph::{fidelity, run_cim};
use cimsim::tensorio::{synth_model, NetworkDesc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = synth_model(2, &NetworkDesc::tiny_cnn())?;
    let net = bundle.network()?;
    let mut cfg = SimulationConfig::example();
    cfg.quant.weight_bits = 8;
    cfg.quant.input_bits = 8;
    cfg.mapping.cell_bits = 4;
    cfg.adc.precision = 8;

    println!("{:<10}{:<14}{:>10}{:>10}{:>10}", "design", "cancellation", "r=inf", "r=17", "r=10");
    for design in Design::ALL {
        cfg.mapping.design = design;
        for oc in [OffsetCancellation::DummyColumn, OffsetCancellation::None] {
            cfg.mapping.offset_cancellation = oc;
            print!("{:<10}{:<14}", design.to_string(), format!("{oc:?}"));
            for dev in [DeviceModel::ideal(), DeviceModel::rram_17(), DeviceModel::rram_10()] {
                cfg.device = DeviceModel { cell_bits_max: 4, ..dev };
                let f = fidelity(&run_cim(&net, &bundle.inputs, &cfg)?.outputs, &bundle.labels)?;
                print!("{f:>10.3}");
            }
            println!();
        }
    }

    println!("\ncell variation on rram-150, Design2");
    cfg.mapping.design = Design::Design2;
    cfg.mapping.offset_cancellation = OffsetCancellation::DummyColumn;
    for sigma in [0.0, 0.05, 0.1, 0.2, 0.4] {
        cfg.device = DeviceModel { cell_bits_max: 4, sigma_cell: sigma, ..DeviceModel::rram_150() };
        let f = fidelity(&run_cim(&net, &bundle.inputs, &cfg)?.outputs, &bundle.labels)?;
        println!("  sigma {sigma:<5} fidelity {f:.3}");
    }
    Ok(())
}
