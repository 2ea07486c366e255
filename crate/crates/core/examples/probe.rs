// Scratch probe: inspect the stuck mode of one training ensemble.
use paircall::estimate::z_distance_with_perm;
use paircall::mcmc::{split_counts, FlatKernel, Kernel, PtEnsemble, TemperatureLadder};
use paircall::simulate::{generate, SimSpec};
use paircall::Hyperparams;
use rand::SeedableRng;
use std::sync::Arc;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let c: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let sweeps: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(6000);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20_260_812);
    let (counts, truth) = generate(&SimSpec::sim3_with_pairs(40), &mut rng).unwrap();
    let b = paircall::mcmc::choose_b(&counts, 160.0).unwrap();
    let split = split_counts(&counts, b).unwrap();
    let kernel = FlatKernel::new(Arc::new(split.train.clone()), Hyperparams::default(), c, false, 0.2, 0.1);
    let ladder = TemperatureLadder::default_ten();
    let mut ens = PtEnsemble::new(kernel, &ladder, 0.9, 42, 0).unwrap();
    for _ in 0..sweeps {
        ens.pt_sweep();
    }
    let st = ens.cold_state();
    println!("train loglik = {:.1}", ens.kernel().log_lik_counts(&split.train, st));
    if c == truth.z.n_subclones() {
        let (d, perm) = z_distance_with_perm(&st.z, &truth.z).unwrap();
        println!("z distance to truth = {d} (perm {perm:?})");
        // show mismatching pairs
        for k in 0..truth.z.n_pairs() {
            let est: Vec<usize> = perm.iter().enumerate().map(|(e, _)| st.z.idx(k, e) + 1).collect();
            let tru: Vec<usize> = (0..3).map(|cc| truth.z.idx(k, cc) + 1).collect();
            let aligned: Vec<usize> = (0..3).map(|t_col| {
                let e_col = perm.iter().position(|&p| p == t_col).unwrap();
                st.z.idx(k, e_col) + 1
            }).collect();
            if aligned != tru {
                println!("pair {:2}: est(aligned) {:?} vs truth {:?}  raw est {:?}", k + 1, aligned, tru, est);
            }
        }
        println!("w rows (est, aligned | truth):");
        for t in 0..6 {
            let w = st.weights();
            let al: Vec<f64> = (0..3).map(|t_col| {
                let e_col = perm.iter().position(|&p| p == t_col).unwrap();
                w.w[t][e_col + 1]
            }).collect();
            println!("  t{}: {:?} | {:?}", t, al.iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>(), truth.w.w[t][1..].iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>());
        }
    }
}
