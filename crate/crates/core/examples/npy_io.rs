//! Save a model bundle, reload it, and round-trip tensors through NPY.
//!
//!     cargo run --example npy_io

use cimsim::tensorio::{read_tensor, synth_model, write_tensor, ModelBundle, NetworkDesc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("cimsim-npy-io");
    let bundle = synth_model(6, &NetworkDesc::tiny_attention(1))?;
    bundle.save(&dir)?;
    let mut files: Vec<_> = std::fs::read_dir(&dir)?.collect::<Result<_, _>>()?;
    files.sort_by_key(|e| e.file_name());
    for e in files {
        println!("{:<28}{:>8} bytes", e.file_name().to_string_lossy(), e.metadata()?.len());
    }
    let back = ModelBundle::load(&dir)?;
    assert_eq!(back.params, bundle.params);
    assert_eq!(back.inputs, bundle.inputs);
    assert_eq!(back.labels, bundle.labels);

    let w = bundle.param("attn", "wq").or_else(|| bundle.params.values().next()).unwrap();
    let path = dir.join("copy.npy");
    write_tensor(&path, w)?;
    assert_eq!(&read_tensor(&path)?, w);
    println!("reloaded bundle and a {:?} tensor intact", w.shape());
    Ok(())
}
