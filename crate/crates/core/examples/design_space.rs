//! Greedy search over quantization, mapping, cell precision, ADC precision
//! and device.
//!
//!     cargo run --release --example design_space

use cimsim::config::SimulationConfig;
use cimsim::dse::{explore, SearchSpace};
use cimsim::tensorio::{synth_model, NetworkDesc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = synth_model(5, &NetworkDesc::tiny_cnn())?;
    let space = SearchSpace::from_json(
        r#"{
            "schemes": ["uniform-symmetric", "dynamic-fixed-point"],
            "bits": [4, 8],
            "designs": ["design1", "design2", "design3"],
            "cell_bits": [1, 2, 4],
            "adc_precision": [3, 9],
            "devices": ["rram-150", "fefet-100", "rram-17"]
        }"#,
    )?;
    let result = explore(&space, &bundle, &SimulationConfig::example())?;
    print!("{}", result.render_tables());
    let c = &result.selection.config;
    println!(
        "\nselected {} N={} {} k={} p={} on r={} ({:.3} TOPS/W)",
        c.quant.scheme,
        c.quant.weight_bits,
        c.mapping.design,
        c.mapping.cell_bits,
        c.adc.precision,
        c.device.on_off_ratio.0,
        result.selection.report.metrics.tops_per_w
    );
    Ok(())
}
