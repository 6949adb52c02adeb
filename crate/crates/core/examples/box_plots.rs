//! Five-number summaries and an SVG box plot of two score samples.
//!
//! ```text
//! cargo run --example box_plots -- [out.svg]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use xai_disparity::report::{box_plot_svg, box_stats};

fn main() -> std::io::Result<()> {
    let b = box_stats(&[0.0, 1.0, 2.0, 3.0, 100.0]).expect("non-empty");
    println!(
        "{{0,1,2,3,100}}: q1 {} median {} q3 {} whiskers [{}, {}] outliers {:?}",
        b.q1, b.median, b.q3, b.lower_whisker, b.upper_whisker, b.outliers
    );

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let male: Vec<f64> = Normal::new(0.40, 0.08)
        .unwrap()
        .sample_iter(&mut rng)
        .take(200)
        .collect();
    let female: Vec<f64> = Normal::new(0.48, 0.10)
        .unwrap()
        .sample_iter(&mut rng)
        .take(200)
        .collect();
    let svg = box_plot_svg("LIME / Compr.", &[("MALE", &male), ("FEMALE", &female)]);

    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "box_plot.svg".into());
    std::fs::write(&path, svg)?;
    println!("wrote {path}");
    Ok(())
}
