use warm_core::equilibria::find_equilibria;
use warm_core::model::{build_cycle, graph_to_warm};
use warm_core::simulate;

fn main() {
    let model = graph_to_warm(&build_cycle(3).unwrap(), 2.0).unwrap();
    let catalog = find_equilibria(&model);
    for seed in [0x57a7u64, 1, 99, 4242] {
        let b = simulate::batch(&model, 200, 100_000, seed, &catalog).unwrap();
        let within = b.runs.iter().filter(|r| r.nearest_distance.unwrap() <= 0.1).count();
        let half: usize = catalog
            .equilibria
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                let mut s = e.point.as_slice().to_vec();
                s.sort_by(|a, b| b.total_cmp(a));
                (s[0] - 0.5).abs() < 1e-9 && s[2].abs() < 1e-12
            })
            .map(|(i, _)| b.histogram[i])
            .sum();
        let near_uniform = b
            .runs
            .iter()
            .filter(|r| {
                let mut s = r.final_proportions.clone();
                s.sort_by(|a, b| b.total_cmp(a));
                s.iter()
                    .zip(&[1.0 / 3.0; 3])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
                    < 0.02
            })
            .count();
        println!(
            "seed {seed:#x}: within0.1 = {within}/200, half-half = {half}/200, near-uniform = {near_uniform}"
        );
    }
}
