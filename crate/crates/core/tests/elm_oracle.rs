use nalgebra::DMatrix;
use neuroloop::elm::{
    fit_with, init_model, offline_accuracy, train, AnalogConfig, HiddenPath, RidgeScale, TrainingSet,
};
use neuroloop::engine::{steady_state_dataset, Engine};
use neuroloop::seed::{child_rng, rng_from};
use neuroloop::task::Command;
use rand::seq::SliceRandom;
use rand::Rng;

/// (HᵀH + λI)⁻¹ HᵀT by Gauss-Jordan elimination with partial pivoting on
/// plain row-major vectors.
fn normal_equations(h: &[Vec<f64>], t: &[Vec<f64>], lambda: f64) -> Vec<Vec<f64>> {
    let l = h[0].len();
    let c = t[0].len();
    let mut a = vec![vec![0.0; l + c]; l];
    for i in 0..l {
        for j in 0..l {
            a[i][j] = h.iter().map(|r| r[i] * r[j]).sum::<f64>();
        }
        a[i][i] += lambda;
        for k in 0..c {
            a[i][l + k] = h.iter().zip(t).map(|(r, tr)| r[i] * tr[k]).sum::<f64>();
        }
    }
    for col in 0..l {
        let piv = (col..l).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..l {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for k in 0..l + c {
                        a[r][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    a.into_iter().map(|row| row[l..].to_vec()).collect()
}

#[test]
fn readout_matches_normal_equations() {
    let mut rng = rng_from(2024);
    for _ in 0..20 {
        let n = rng.random_range(1..=200);
        let l = rng.random_range(1..=50);
        let h: Vec<Vec<f64>> = (0..n).map(|_| (0..l).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let t: Vec<Vec<f64>> = labels
            .iter()
            .map(|&k| (0..4).map(|c| if c == k { 1.0 } else { 0.0 }).collect())
            .collect();
        let expected = normal_equations(&h, &t, 0.1);

        let hm = DMatrix::from_fn(n, l, |r, c| h[r][c]);
        let model = init_model(8, l, 4, 1, None).unwrap();
        let trained = train(&model, &TrainingSet::new(hm, TrainingSet::one_hot(&labels, 4), 0.1).unwrap()).unwrap();
        let scale = expected.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 0..l {
            for k in 0..4 {
                let got = trained.beta()[j * 4 + k];
                assert!(
                    (got - expected[j][k]).abs() <= 1e-6 * scale.max(1e-12),
                    "N={n} L={l} beta[{j},{k}] = {got} vs {}",
                    expected[j][k]
                );
            }
        }
    }
}

#[test]
fn mismatch_weights_are_log_normal() {
    let m = init_model(200, 200, 4, 99, Some(AnalogConfig::default())).unwrap();
    let logs: Vec<f64> = m.weights().iter().map(|w| w.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let sd = (logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (logs.len() - 1) as f64).sqrt();
    assert!(mean.abs() <= 0.02, "mean ln w = {mean}");
    assert!((sd - 0.5).abs() <= 0.02, "sd ln w = {sd}");
    assert!(m.weights().iter().all(|&w| w > 0.0));
}

type Dataset = (Vec<Vec<f64>>, Vec<Command>);

fn split_dataset(engine: &Engine) -> (Dataset, Dataset) {
    let train = steady_state_dataset(engine, 250, 0).unwrap();
    let test = steady_state_dataset(engine, 1000, 1).unwrap();
    (train, test)
}

#[test]
fn high_snr_decoding_is_accurate() {
    let e = Engine::default();
    let ((x, y), (xt, yt)) = split_dataset(&e);
    let m = fit_with(&e.init_model().unwrap(), &x, &y, 0.01, RidgeScale::Relative).unwrap();
    let acc = offline_accuracy(&m, &xt, &yt).unwrap();
    assert!(acc >= 0.9, "accuracy {acc}");
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    // Labels carry no information about the features, in training and on the
    // held-out set alike.
    let e = Engine::default();
    let ((x, mut y), (xt, _)) = split_dataset(&e);
    let mut rng = child_rng(5, "shuffle", 0);
    y.shuffle(&mut rng);
    let yt: Vec<Command> = (0..xt.len())
        .map(|_| Command::ALL[rng.random_range(0..4)])
        .collect();
    let m = fit_with(&e.init_model().unwrap(), &x, &y, 0.01, RidgeScale::Relative).unwrap();
    let acc = offline_accuracy(&m, &xt, &yt).unwrap();
    assert!((acc - 0.25).abs() <= 0.02, "accuracy {acc}");
}

fn path_agreement(bits: u32) -> f64 {
    let mut e = Engine::default();
    e.model.analog.as_mut().unwrap().counter_bits = bits;
    let ((x, y), _) = split_dataset(&e);
    let m = fit_with(&e.init_model().unwrap(), &x, &y, 0.01, RidgeScale::Relative).unwrap();
    // held-out vectors at a lower SNR so decisions are not trivially separated
    let mut noisy = e.clone();
    noisy.encoder.dr = 10.0;
    let (xt, _) = steady_state_dataset(&noisy, 2500, 7).unwrap();
    let same = xt
        .iter()
        .filter(|v| m.predict_with(v, HiddenPath::Analog).unwrap() == m.predict_with(v, HiddenPath::Float).unwrap())
        .count();
    same as f64 / xt.len() as f64
}

#[test]
fn analog_decisions_track_float_decisions() {
    let a16 = path_agreement(16);
    let a8 = path_agreement(8);
    assert!(a16 >= 0.99, "16-bit agreement {a16}");
    assert!(a8 >= 0.95, "8-bit agreement {a8}");
}
