//! Regenerates `fixtures/generator.lpwf` and `fixtures/classifier.lpwf`.
//!
//! The generator is a two-layer dense network (100 -> 32 -> 784, relu then
//! tanh). Ten of its hidden units each paint one procedural 28x28 garment
//! silhouette and read a small, heavy-tailed set of latent dims; the other
//! 22 units add low-amplitude texture. The classifier is softmax regression
//! over the 784 pixels, fit by full-batch gradient descent on generator
//! samples labelled by their strongest garment unit.
//!
//! Usage: `cargo run --release --example build_fixtures [-- OUT_DIR]`

use std::path::PathBuf;

use latent_probe::models::{save_model, Dense, Layer, NetworkModel, Role};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const N: usize = 100;
const SIDE: usize = 28;
const PIXELS: usize = SIDE * SIDE;
const CLASSES: usize = 10;
const STYLE: usize = 22;
const HIDDEN: usize = CLASSES + STYLE;
const PER_CLASS: usize = 8;
const SEED: u64 = 20_190_601;

/// f32-representable value, so the file holds exactly what was built.
fn f32r(v: f64) -> f64 {
    v as f32 as f64
}

fn rect(img: &mut [f64], y0: usize, y1: usize, x0: usize, x1: usize) {
    for y in y0..y1 {
        for x in x0..x1 {
            img[y * SIDE + x] = 1.0;
        }
    }
}

fn ellipse(img: &mut [f64], cy: f64, cx: f64, ry: f64, rx: f64) {
    for y in 0..SIDE {
        for x in 0..SIDE {
            let (dy, dx) = ((y as f64 - cy) / ry, (x as f64 - cx) / rx);
            if dy * dy + dx * dx <= 1.0 {
                img[y * SIDE + x] = 1.0;
            }
        }
    }
}

/// Rough silhouettes: tee, trouser, pullover, dress, coat, sandal, shirt,
/// sneaker, bag, ankle boot.
fn prototypes() -> Vec<Vec<f64>> {
    let mut p = vec![vec![0.0; PIXELS]; CLASSES];
    rect(&mut p[0], 5, 24, 8, 20);
    rect(&mut p[0], 5, 11, 3, 25);

    rect(&mut p[1], 3, 26, 8, 13);
    rect(&mut p[1], 3, 26, 15, 20);
    rect(&mut p[1], 3, 7, 8, 20);

    rect(&mut p[2], 4, 25, 7, 21);
    rect(&mut p[2], 5, 24, 2, 6);
    rect(&mut p[2], 5, 24, 22, 26);

    for y in 3..26 {
        let half = 3 + (y - 3) * 8 / 23;
        for x in 14 - half..14 + half {
            p[3][y * SIDE + x] = 1.0;
        }
    }

    rect(&mut p[4], 2, 27, 6, 22);
    rect(&mut p[4], 3, 27, 1, 5);
    rect(&mut p[4], 3, 27, 23, 27);

    for y in (16..24).step_by(3) {
        rect(&mut p[5], y, y + 1, 2, 26);
    }
    rect(&mut p[5], 22, 24, 2, 26);

    rect(&mut p[6], 4, 25, 7, 21);
    rect(&mut p[6], 4, 20, 3, 7);
    rect(&mut p[6], 4, 20, 21, 25);
    rect(&mut p[6], 4, 25, 13, 15);

    ellipse(&mut p[7], 19.0, 14.0, 4.0, 12.0);
    rect(&mut p[7], 19, 24, 2, 26);

    rect(&mut p[8], 9, 25, 4, 24);
    ellipse(&mut p[8], 8.0, 14.0, 5.0, 6.0);
    ellipse(&mut p[8], 8.0, 14.0, 3.0, 4.0);
    for y in 3..9 {
        for x in 10..18 {
            let (dy, dx) = ((y as f64 - 8.0) / 3.0, (x as f64 - 14.0) / 4.0);
            if dy * dy + dx * dx <= 1.0 {
                p[8][y * SIDE + x] = 0.0;
            }
        }
    }

    rect(&mut p[9], 4, 24, 12, 20);
    rect(&mut p[9], 17, 24, 3, 25);
    p
}

fn generator(rng: &mut ChaCha8Rng) -> NetworkModel {
    let mut dims: Vec<usize> = (0..N).collect();
    dims.shuffle(rng);

    // hidden layer: garment units read PER_CLASS dims with heavy-tailed
    // weights over a faint dense background; style units are dense and weak
    let mut w1 = vec![0.0; HIDDEN * N];
    let mut b1 = vec![0.0; HIDDEN];
    for c in 0..CLASSES {
        for i in 0..N {
            let g: f64 = StandardNormal.sample(rng);
            w1[c * N + i] = 0.03 * g;
        }
        for (rank, &d) in dims[c * PER_CLASS..(c + 1) * PER_CLASS].iter().enumerate() {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            w1[c * N + d] = sign * 1.2 / (1.0 + rank as f64).powf(0.6);
        }
        b1[c] = -0.8;
    }
    for s in CLASSES..HIDDEN {
        for i in 0..N {
            let g: f64 = StandardNormal.sample(rng);
            w1[s * N + i] = 0.15 * g;
        }
    }

    let protos = prototypes();
    let mut w2 = vec![0.0; PIXELS * HIDDEN];
    let mut b2 = vec![0.0; PIXELS];
    for (p, b) in b2.iter_mut().enumerate() {
        *b = -1.2;
        for c in 0..CLASSES {
            w2[p * HIDDEN + c] = 1.0 * protos[c][p];
        }
        for s in CLASSES..HIDDEN {
            let g: f64 = StandardNormal.sample(rng);
            w2[p * HIDDEN + s] = 0.08 * g;
        }
    }

    let round = |v: Vec<f64>| v.into_iter().map(f32r).collect::<Vec<_>>();
    NetworkModel::new(
        Role::Generator,
        N,
        PIXELS,
        (SIDE, SIDE),
        vec![
            Layer::Dense(Dense::new(HIDDEN, N, round(w1), round(b1)).unwrap()),
            Layer::Relu,
            Layer::Dense(Dense::new(PIXELS, HIDDEN, round(w2), round(b2)).unwrap()),
            Layer::Tanh,
        ],
    )
    .unwrap()
}

fn dataset(gen: &NetworkModel, rng: &mut ChaCha8Rng, count: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let Layer::Dense(first) = &gen.layers()[0] else {
        unreachable!()
    };
    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for _ in 0..count {
        let z: Vec<f64> = (0..N).map(|_| StandardNormal.sample(rng)).collect();
        let label = (0..CLASSES)
            .max_by(|&a, &b| {
                let act = |c: usize| {
                    first.bias()[c]
                        + first.weights()[c * N..(c + 1) * N]
                            .iter()
                            .zip(&z)
                            .map(|(w, v)| w * v)
                            .sum::<f64>()
                };
                act(a).total_cmp(&act(b))
            })
            .unwrap();
        xs.push(gen.forward(&z).unwrap());
        ys.push(label);
    }
    (xs, ys)
}

fn softmax(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter_mut().for_each(|x| *x = (*x - max).exp());
    let t: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= t);
}

fn classifier(xs: &[Vec<f64>], ys: &[usize]) -> NetworkModel {
    let mut w = vec![0.0; CLASSES * PIXELS];
    let mut b = vec![0.0; CLASSES];
    let lr = 0.05;
    let decay = 1e-4;
    for epoch in 0..600 {
        let mut gw = vec![0.0; CLASSES * PIXELS];
        let mut gb = vec![0.0; CLASSES];
        let mut correct = 0;
        for (x, &y) in xs.iter().zip(ys) {
            let mut p: Vec<f64> = (0..CLASSES)
                .map(|c| b[c] + w[c * PIXELS..(c + 1) * PIXELS].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
                .collect();
            softmax(&mut p);
            let pred = (0..CLASSES).max_by(|&i, &j| p[i].total_cmp(&p[j])).unwrap();
            correct += usize::from(pred == y);
            p[y] -= 1.0;
            for c in 0..CLASSES {
                gb[c] += p[c];
                for (g, v) in gw[c * PIXELS..(c + 1) * PIXELS].iter_mut().zip(x) {
                    *g += p[c] * v;
                }
            }
        }
        let scale = lr / xs.len() as f64;
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= scale * gi + lr * decay * *wi;
        }
        for (bi, gi) in b.iter_mut().zip(&gb) {
            *bi -= scale * gi;
        }
        if epoch % 100 == 99 {
            eprintln!("epoch {}: train accuracy {:.3}", epoch + 1, correct as f64 / xs.len() as f64);
        }
    }
    let round = |v: Vec<f64>| v.into_iter().map(f32r).collect::<Vec<_>>();
    NetworkModel::new(
        Role::Classifier,
        PIXELS,
        CLASSES,
        (SIDE, SIDE),
        vec![
            Layer::Dense(Dense::new(CLASSES, PIXELS, round(w), round(b)).unwrap()),
            Layer::Softmax,
        ],
    )
    .unwrap()
}

fn accuracy(clf: &NetworkModel, xs: &[Vec<f64>], ys: &[usize]) -> f64 {
    let hits = xs
        .iter()
        .zip(ys)
        .filter(|(x, &y)| {
            let p = clf.forward(x).unwrap();
            (0..CLASSES).max_by(|&i, &j| p[i].total_cmp(&p[j])).unwrap() == y
        })
        .count();
    hits as f64 / xs.len() as f64
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&out).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let gen = generator(&mut rng);
    let (xs, ys) = dataset(&gen, &mut rng, 3000);
    let clf = classifier(&xs, &ys);
    let (tx, ty) = dataset(&gen, &mut rng, 1000);
    eprintln!("held-out accuracy {:.3}", accuracy(&clf, &tx, &ty));

    save_model(&gen, out.join("generator.lpwf")).unwrap();
    save_model(&clf, out.join("classifier.lpwf")).unwrap();
    eprintln!("wrote {}", out.display());
}
