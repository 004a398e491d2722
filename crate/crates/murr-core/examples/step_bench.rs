use std::time::Instant;

use murr_core::encoder::{EncoderDims, EncoderModel};
use murr_core::trainer::{adam_step, contrastive_loss, regularization_loss, AdamState, TrainingTriple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let dims = EncoderDims { vocab: 2048, ..EncoderDims::default() };
    let model: EncoderModel<f64> = EncoderModel::init(dims, "bench", 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let text = |rng: &mut ChaCha8Rng| {
        (0..10).map(|_| format!("tok{}", rng.gen_range(0..2000))).collect::<Vec<_>>().join(" ")
    };
    let batch: Vec<TrainingTriple> = (0..32)
        .map(|_| TrainingTriple {
            query: text(&mut rng),
            pos: text(&mut rng),
            neg: text(&mut rng),
        })
        .collect();
    let items: Vec<murr_core::trainer::ReplayItem<f64>> = batch
        .iter()
        .map(|t| murr_core::trainer::ReplayItem {
            triple: t.clone(),
            origin_session: 0,
            pos_anchor: vec![0.1; dims.d_out],
            neg_anchor: vec![0.2; dims.d_out],
        })
        .collect();

    let n = 1000;
    let t0 = Instant::now();
    let mut acc = 0.0;
    for _ in 0..n {
        let (l, g) = contrastive_loss(&model, &batch);
        acc += l + g[0];
    }
    println!("contrastive loss+grad (32 triples): {:?}/iter (acc {acc})", t0.elapsed() / n);

    let t0 = Instant::now();
    let mut acc = 0.0;
    for _ in 0..n {
        let (l, g) = regularization_loss(&model, &items);
        acc += l + g[0];
    }
    println!("regularization loss+grad (32 items): {:?}/iter (acc {acc})", t0.elapsed() / n);

    let mut m2 = model.clone();
    let mut adam = AdamState::new(dims.n_params(), 0.9, 0.999, 1e-8);
    let grad = vec![1e-6; dims.n_params()];
    let t0 = Instant::now();
    for _ in 0..n {
        adam_step(&mut adam, &mut m2.theta, &grad, 0.001).unwrap();
    }
    println!("adam step ({} params): {:?}/iter", dims.n_params(), t0.elapsed() / n);

    let t0 = Instant::now();
    let mut acc = 0usize;
    for _ in 0..n {
        acc += vec![0.0f64; dims.n_params()].len();
    }
    println!("grad alloc+zero: {:?}/iter (acc {acc})", t0.elapsed() / n);

    let t0 = Instant::now();
    let mut acc = 0usize;
    for _ in 0..n {
        for t in &batch {
            acc += model.tokenize(&t.query).len()
                + model.tokenize(&t.pos).len()
                + model.tokenize(&t.neg).len();
        }
    }
    println!("tokenize 96 texts: {:?}/iter (acc {acc})", t0.elapsed() / n);

    let t0 = Instant::now();
    let mut acc = 0.0;
    let toks: Vec<Vec<usize>> = batch.iter().map(|t| model.tokenize(&t.query)).collect();
    for _ in 0..(n * 3) {
        for tk in &toks {
            let f = model.forward(tk);
            acc += f.output[0];
        }
    }
    println!("forward 32 texts: {:?}/iter (acc {acc})", t0.elapsed() / (n * 3));

    use murr_core::trainer::{train_session, Strategy, TrainConfig, ReplaySet};
    let many: Vec<TrainingTriple> = (0..4800)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(i);
            TrainingTriple { query: text(&mut r), pos: text(&mut r), neg: text(&mut r) }
        })
        .collect();
    let cfg = TrainConfig { steps: 200, ..TrainConfig::default() };
    let t0 = Instant::now();
    let m = train_session(Strategy::CfNoReplay, 0, &model, &model, &many, &ReplaySet::new(), &cfg).unwrap();
    println!("train_session 200 steps no replay: {:?} ({:?}/step, check {})", t0.elapsed(), t0.elapsed()/200, m.theta[0]);
}
