//! Prints how many Fourier coefficients radial-line masks keep at a few
//! grid sizes, and renders one mask as a PNG so the sampling pattern is
//! visible.
//!
//! ```text
//! cargo run --release --example radial_masks
//! ```

use csdip::io::save_image;
use csdip::linops::radial_mask;
use csdip::tensor::Tensor;

fn main() -> csdip::Result<()> {
    println!("coefficients kept by radial masks (grid size x line count):");
    println!("{:>9} {:>6} {:>8} {:>10}", "grid", "lines", "kept", "fraction");
    for &size in &[64usize, 128, 256] {
        for &lines in &[3usize, 5, 10, 20] {
            let mask = radial_mask(size, size, lines)?;
            let fraction = mask.len() as f64 / (size * size) as f64;
            println!("{size:>6}^2 {lines:>6} {:>8} {fraction:>10.4}", mask.len());
        }
        println!();
    }

    // Render the 10-line mask on a 256 x 256 grid; white pixels are kept
    // frequencies (DC sits in the corner, as the FFT indexes it).
    let size = 256;
    let mask = radial_mask(size, size, 10)?;
    let mut img = Tensor::zeros(&[1, size, size]);
    for &(r, c) in &mask {
        img.data_mut()[r * size + c] = 1.0;
    }
    let dir = std::path::Path::new("target/example-output");
    std::fs::create_dir_all(dir)?;
    let path = dir.join("radial_mask_256_10.png");
    save_image(&path, &img)?;
    println!("wrote {} ({} kept frequencies)", path.display(), mask.len());
    Ok(())
}
