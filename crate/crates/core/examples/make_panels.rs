//! Regenerates the synthetic panels under `tests/data`.
//!
//! `toy_panel.csv`: 90 quarters, two persistent linear factors, three
//! targets and nine predictors.
//!
//! `nonlinear_panel.csv`: 300 months. The target is
//! `y_s = a f_{s-1} + b (g_{s-12}^2 - 1) + e_s` with i.i.d. factors, so the
//! linear factor drives one-step forecasts and the squared factor only
//! enters at the 12-step horizon, where no linear function of the panel can
//! pick it up.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn write(path: &Path, header: &[String], labels: &[String], columns: &[Vec<f64>]) {
    let mut w = csv::Writer::from_path(path).expect("create csv");
    let mut head = vec!["date".to_string()];
    head.extend_from_slice(header);
    w.write_record(&head).unwrap();
    for (i, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(columns.iter().map(|c| format!("{:.6}", c[i])));
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}

fn toy(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = 90;
    let (mut f1, mut f2) = (vec![0.0; t], vec![0.0; t]);
    for s in 1..t {
        f1[s] = 0.8 * f1[s - 1] + normal(&mut rng);
        f2[s] = 0.5 * f2[s - 1] + normal(&mut rng);
    }
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for (name, a, b) in [("GDP", 0.9, 0.3), ("INF", 0.2, 0.8), ("UNRATE", -0.6, 0.1)] {
        let c: Vec<f64> = (0..t).map(|s| if s == 0 { 0.0 } else { a * f1[s - 1] + b * f2[s - 1] } + 0.5 * normal(&mut rng)).collect();
        names.push(name.to_string());
        cols.push(c);
    }
    for j in 0..9 {
        let (a, b) = (normal(&mut rng), normal(&mut rng));
        cols.push((0..t).map(|s| a * f1[s] + b * f2[s] + 0.7 * normal(&mut rng)).collect());
        names.push(format!("X{}", j + 1));
    }
    let labels: Vec<String> = (0..t).map(|s| format!("{}Q{}", 1985 + s / 4, s % 4 + 1)).collect();
    write(&dir.join("toy_panel.csv"), &names, &labels, &cols);
}

fn nonlinear(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let t = 300;
    let (a, b, noise) = (1.0, 1.0, 0.5);
    let f: Vec<f64> = (0..t).map(|_| normal(&mut rng)).collect();
    let g: Vec<f64> = (0..t).map(|_| normal(&mut rng)).collect();
    let y: Vec<f64> = (0..t)
        .map(|s| {
            let lin = if s >= 1 { a * f[s - 1] } else { 0.0 };
            let quad = if s >= 12 { b * (g[s - 12] * g[s - 12] - 1.0) } else { 0.0 };
            lin + quad + noise * normal(&mut rng)
        })
        .collect();
    let mut names = vec!["Y".to_string()];
    let mut cols = vec![y];
    for j in 0..12 {
        let (src, load) = if j < 6 { (&f, 1.0 + 0.1 * j as f64) } else { (&g, 1.0 + 0.1 * (j - 6) as f64) };
        cols.push((0..t).map(|s| load * src[s] + 0.3 * normal(&mut rng)).collect());
        names.push(format!("X{:02}", j + 1));
    }
    let labels: Vec<String> = (0..t).map(|s| format!("{}-{:02}-01", 1980 + s / 12, s % 12 + 1)).collect();
    write(&dir.join("nonlinear_panel.csv"), &names, &labels, &cols);
}

fn main() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    std::fs::create_dir_all(&dir).unwrap();
    toy(&dir);
    nonlinear(&dir);
    println!("wrote panels to {}", dir.display());
}
