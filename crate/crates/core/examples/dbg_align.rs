// debug: find failing partition case
use cotcheck::align::*;
use rand::{Rng, SeedableRng};
fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for it in 0..60 {
        let nr = rng.gen_range(0..=5);
        let np = rng.gen_range(0..=5);
        let sim: Vec<Vec<f64>> = (0..nr)
            .map(|_| (0..np).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let a = align_from_matrix(&sim, 0.5);
        if !a.check_partition(nr, np) {
            println!("iter {it} nr={nr} np={np} sim={sim:?}\nalignment={a:?}");
            return;
        }
    }
    println!("all ok");
}
