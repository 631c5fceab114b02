use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use persuasion_core::stats::{
    fit_bradley_terry, fleiss_kappa, welch_t_test, PairwiseTally, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
use persuasion_core::SocialDimension;

fn random_tally(rng: &mut ChaCha8Rng) -> PairwiseTally {
    let dims = SocialDimension::ALL.to_vec();
    let strengths: Vec<f64> = (0..dims.len()).map(|i| 1.0 + i as f64 * 0.5).collect();
    let mut t = PairwiseTally::new(dims.clone()).unwrap();
    for i in 0..dims.len() {
        for j in i + 1..dims.len() {
            for _ in 0..50 {
                if rng.random::<f64>() < strengths[i] / (strengths[i] + strengths[j]) {
                    t.add(dims[i], dims[j], 1).unwrap();
                } else {
                    t.add(dims[j], dims[i], 1).unwrap();
                }
            }
        }
    }
    t
}

fn bench(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tally = random_tally(&mut rng);
    c.bench_function("bradley_terry_10_entities", |b| {
        b.iter(|| fit_bradley_terry(black_box(&tally), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap())
    });

    let table: Vec<Vec<u64>> = (0..500)
        .map(|_| {
            let k = rng.random_range(0..=10);
            vec![k, 10 - k]
        })
        .collect();
    c.bench_function("fleiss_kappa_500_items", |b| b.iter(|| fleiss_kappa(black_box(&table)).unwrap()));

    let x: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
    let y: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() + 0.05).collect();
    c.bench_function("welch_1000", |b| b.iter(|| welch_t_test(black_box(&x), black_box(&y)).unwrap()));
}

criterion_group!(benches, bench);
criterion_main!(benches);
