//! Scratch driver: desk-scale norm study statistics.
use safebo_core::study::{norm_study, NormStudyParams};

fn main() {
    let t0 = std::time::Instant::now();
    let params = NormStudyParams::desk_scale(42);
    let (rows, summary) = norm_study(&params);
    println!("elapsed {:.1}s rows {}", t0.elapsed().as_secs_f64(), rows.len());
    println!(
        "mean ratio t=1: {:.3}  t=15: {:.3}  t=30: {:.3}",
        summary.mean_ratio[0], summary.mean_ratio[14], summary.mean_ratio[29]
    );
    println!("std  ratio t=30: {:.3}", summary.std_ratio[29]);
    println!("under-estimating functions: {}", summary.underestimating_functions);
    // per-function monotonicity
    let mut mono = true;
    for chunk in rows.chunks(params.iterations) {
        for w in chunk.windows(2) {
            if w[1].bound > w[0].bound {
                mono = false;
            }
        }
    }
    println!("monotone: {mono}");
}
