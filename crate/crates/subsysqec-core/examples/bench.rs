use std::time::Instant;
use subsysqec_core::experiments::{
    pseudo_threshold, ErrorType, Progress, ThresholdOptions,
};

fn main() {
    let opts = ThresholdOptions::default();
    let mut stars = std::collections::HashMap::new();
    for (n1, n2) in [(3u16, 3u16), (5, 3)] {
        for ty in [ErrorType::Z, ErrorType::X] {
            let t0 = Instant::now();
            match pseudo_threshold(n1, n2, ty, 1.0, 42, &opts, &Progress::none()) {
                Ok(r) => {
                    println!(
                        "C({n1},{n2}) p*_{ty} = {:.3e} bracket [{:.2e}, {:.2e}] extrap={} slope={:?} ({:?})",
                        r.p_star, r.bracket.0, r.bracket.1, r.extrapolated, r.slope, t0.elapsed()
                    );
                    stars.insert((n1, ty as u8), r.p_star);
                }
                Err(e) => println!("C({n1},{n2}) {ty}: {e}"),
            }
        }
    }
    if let (Some(a), Some(b)) = (stars.get(&(5, 0)), stars.get(&(3, 0))) {
        println!("ratio p*_Z(5,3)/(3,3) = {:.2}", a / b);
    }
    if let (Some(a), Some(b)) = (stars.get(&(5, 1)), stars.get(&(3, 1))) {
        println!("ratio p*_X(5,3)/(3,3) = {:.2}", a / b);
    }
}
