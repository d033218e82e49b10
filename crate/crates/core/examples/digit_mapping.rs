//! How the three weight mappings split signed integers into k-bit cells.
//!
//!     cargo run --example digit_mapping

use cimsim::config::{Design, QuantScheme};
use cimsim::digitmap::decompose_weights;
use cimsim::quant::{QuantParams, QuantizedTensor, Signedness};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bits = 6;
    let cell_bits = 2;
    let values = vec![-31, -17, -1, 0, 1, 9, 22, 31];
    let params = QuantParams::new(QuantScheme::UniformSymmetric, bits, 1.0, Signedness::Signed)?;
    let q = QuantizedTensor::new(vec![values.len()], values.clone(), params)?;

    println!("weights {values:?}, N={bits}, k={cell_bits}\n");
    for design in Design::ALL {
        let planes = decompose_weights(&q, design, cell_bits)?;
        println!("{design}");
        for p in &planes.planes {
            println!("  {:<10} x{:<4} {:?}", format!("{:?}", p.role), p.significance, p.digits);
        }
        if let Some(d) = planes.dummy {
            println!("  dummy      x{:<4} digit {}", d.significance, d.digit);
        }
        let back: Vec<i64> = (0..values.len()).map(|i| planes.reconstruct(i)).collect();
        println!("  reassembled {back:?}\n");
    }
    Ok(())
}
