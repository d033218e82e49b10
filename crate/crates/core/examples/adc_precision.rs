//! Fidelity against ADC precision for each mapping, with linear and
//! calibrated converters.
//!
//!     cargo run --release --example adc_precision

use cimsim::config::{AdcKind, Design, DeviceModel, SimulationConfig};
use cimsim::netgraph::{fidelity, run_cim, run_software};
use cimsim::tensorio::{synth_model, NetworkDesc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = synth_model(1, &NetworkDesc::tiny_cnn())?;
    let net = bundle.network()?;
    let mut cfg = SimulationConfig::example();
    cfg.quant.weight_bits = 8;
    cfg.quant.input_bits = 8;
    cfg.mapping.cell_bits = 4;
    cfg.device = DeviceModel { cell_bits_max: 4, ..DeviceModel::ideal() };

    let base = fidelity(&run_software(&net, &bundle.inputs, &cfg.quant)?, &bundle.labels)?;
    println!("software baseline {base:.3}\n");
    for kind in [AdcKind::Linear, AdcKind::Calibrated] {
        cfg.adc.kind = kind;
        println!("{kind:?} ADC");
        print!("{:<9}", "p");
        for p in 3..=10 {
            print!("{p:>7}");
        }
        println!();
        for design in Design::ALL {
            cfg.mapping.design = design;
            print!("{design:<9}");
            for p in 3..=10 {
                cfg.adc.precision = p;
                let f = fidelity(&run_cim(&net, &bundle.inputs, &cfg)?.outputs, &bundle.labels)?;
                print!("{f:>7.3}");
            }
            println!();
        }
        println!();
    }
    Ok(())
}
