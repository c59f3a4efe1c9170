//! Write a stack with metadata to disk and read it back.

use aspi::stack::sidecar_path;
use aspi::{read_stack, write_stack, Frame, Metadata, Stack};

fn main() -> aspi::Result<()> {
    let dir = std::env::temp_dir().join(format!("aspi-stack-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("demo.aspi");
    let frames = (0..4)
        .map(|k| Frame::from_fn(8, 6, |x, y| (x + y * 8 + k * 48) as f32))
        .collect::<aspi::Result<Vec<_>>>()?;
    let mut meta = Metadata::new();
    meta.set("kind", "demo").set("z_step", 0.05);
    write_stack(&path, &Stack::from_frames(&frames, meta)?)?;
    let back = read_stack(&path)?;
    println!("{} planes of {}x{}", back.planes.len(), back.width, back.height);
    println!("sidecar {}", sidecar_path(&path).display());
    for (k, v) in back.metadata.iter() {
        println!("  {k} = {v}");
    }
    println!("identical: {}", back.to_frames()? == frames);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
