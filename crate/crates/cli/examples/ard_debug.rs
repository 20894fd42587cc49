// diagnostic: ARD modal |J| under different chain settings
use matfact::gibbs::GibbsConfig;
use matfact::id::{fit_id, IdHyper, IdVariant};
use matfact::MaskedMatrix;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(seed: u64) -> MaskedMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(800 + seed);
    let mut base = Vec::new();
    for _ in 0..4 {
        let col: Vec<f64> = (0..20).map(|_| rng.sample::<f64,_>(rand_distr::StandardNormal)).collect();
        base.push(col);
    }
    let values = Array2::from_shape_fn((20, 12), |(i, j)| {
        base[j % 4][i] + 1e-2 * rng.sample::<f64,_>(rand_distr::StandardNormal)
    });
    MaskedMatrix::full(values)
}

fn main() {
    for (nu, iters) in [(5usize, 300usize), (1, 300), (1, 1000), (5, 1000)] {
        let mut modal_counts = Vec::new();
        for seed in 0..10u64 {
            let a = data(seed);
            let mut h = IdHyper::default();
            h.nu = nu;
            let cfg = GibbsConfig::new(iters, iters / 2, 1, seed).unwrap();
            let fit = fit_id(IdVariant::GbtArd, &a, None, &h, &cfg).unwrap();
            modal_counts.push(fit.trace.modal_selected_count().unwrap());
        }
        let hits = modal_counts.iter().filter(|&&c| c == 4).count();
        println!("nu={nu} iters={iters}: modal counts {modal_counts:?} -> {hits}/10 exact");
    }
}
