use std::path::{Path, PathBuf};

use patch_ot::cli::run;
use patch_ot::io::{self, Dtype};
use patch_ot::linalg::TransportKind;
use patch_ot::metrics::{mse, CURVE_CSV_HEADER};
use patch_ot::LatentTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn sh(args: &[&str]) -> i32 {
    run(std::iter::once("patch-ot").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn noise_latent(c: usize, h: usize, w: usize, seed: u64, scale: f64) -> LatentTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..c * h * w).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    LatentTensor::new(c, h, w, data).unwrap()
}

fn write_set(dir: &Path, name: &str, role: &str, tensors: &[LatentTensor]) -> PathBuf {
    let mut lines = format!("#role={role}\n");
    for (i, t) in tensors.iter().enumerate() {
        let file = format!("{name}_{i}.npy");
        io::write_tensor(dir.join(&file), t, Dtype::F64).unwrap();
        lines.push_str(&file);
        lines.push('\n');
    }
    let manifest = dir.join(format!("{name}.txt"));
    std::fs::write(&manifest, lines).unwrap();
    manifest
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(sh(&[]), 2);
    assert_eq!(sh(&["no-such-command"]), 2);
    assert_eq!(sh(&["fit-stats", "--patch-size", "3"]), 2);
    assert_eq!(sh(&["interpolate", "--x-star", "a", "--x-hat0", "b", "--alpha", "x", "--out", "c"]), 2);
    assert_eq!(sh(&["transport", "--input", "a", "--operator", "b", "--out", "c", "--dtype", "f16"]), 2);
    assert_eq!(sh(&["--threads", "0", "gmm-demo", "--out", "x"]), 2);
}

#[test]
fn fit_stats_reports_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let latents: Vec<_> = (0..10).map(|i| noise_latent(4, 12, 12, i, 1.0)).collect();
    let manifest = write_set(d, "nat", "natural", &latents);
    let out = d.join("nat.stats");
    assert_eq!(sh(&["fit-stats", "--manifest", p(&manifest), "--patch-size", "3", "--out", p(&out)]), 0);
    let s = io::load_stats(&out).unwrap();
    assert_eq!(s.dim(), 36);
    assert_eq!(s.count(), 10 * 10 * 10);

    let single = write_set(d, "one", "natural", &latents[..1]);
    assert_eq!(sh(&["fit-stats", "--manifest", p(&single), "--out", p(&out)]), 0);
    assert_eq!(io::load_stats(&out).unwrap().count(), 100);

    let mixed = write_set(d, "mixed", "natural", &[latents[0].clone(), noise_latent(3, 12, 12, 99, 1.0)]);
    assert_eq!(sh(&["fit-stats", "--manifest", p(&mixed), "--out", p(&out)]), 3);

    let empty = d.join("empty.txt");
    std::fs::write(&empty, "#role=natural\n").unwrap();
    assert_eq!(sh(&["fit-stats", "--manifest", p(&empty), "--out", p(&out)]), 3);
    assert_eq!(sh(&["fit-stats", "--manifest", p(&manifest), "--patch-size", "13", "--out", p(&out)]), 3);
}

#[test]
fn build_and_transport() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let nat: Vec<_> = (0..10).map(|i| noise_latent(4, 12, 12, i, 1.0)).collect();
    let res: Vec<_> = (0..10).map(|i| noise_latent(4, 12, 12, 100 + i, 0.5)).collect();
    let (nat_m, res_m) = (write_set(d, "nat", "natural", &nat), write_set(d, "res", "restored", &res));
    let (nat_s, res_s) = (d.join("nat.stats"), d.join("res.stats"));
    assert_eq!(sh(&["fit-stats", "--manifest", p(&nat_m), "--out", p(&nat_s)]), 0);
    assert_eq!(sh(&["fit-stats", "--manifest", p(&res_m), "--out", p(&res_s)]), 0);

    // identical statistics give the identity
    let ident = d.join("ident.op");
    assert_eq!(sh(&["build", "--source", p(&nat_s), "--target", p(&nat_s), "--out", p(&ident)]), 0);
    let input = d.join("nat_0.npy");
    let out = d.join("out.npy");
    assert_eq!(
        sh(&["transport", "--input", p(&input), "--operator", p(&ident), "--dtype", "f64", "--out", p(&out)]),
        0
    );
    let x = io::read_tensor(&input).unwrap();
    let y = io::read_tensor(&out).unwrap();
    let err = x.data().iter().zip(y.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-12);

    // deterministic operator: identical across thread counts
    let op = d.join("res2nat.op");
    assert_eq!(sh(&["build", "--source", p(&res_s), "--target", p(&nat_s), "--out", p(&op)]), 0);
    assert_eq!(io::load_operator(&op).unwrap().kind(), TransportKind::Deterministic);
    let res_in = d.join("res_0.npy");
    let (o1, o4) = (d.join("o1.npy"), d.join("o4.npy"));
    assert_eq!(sh(&["--threads", "1", "transport", "--input", p(&res_in), "--operator", p(&op), "--out", p(&o1)]), 0);
    assert_eq!(sh(&["--threads", "4", "transport", "--input", p(&res_in), "--operator", p(&op), "--out", p(&o4)]), 0);
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o4).unwrap());

    // operator for a different channel count
    let wrong = write_set(d, "wrong", "restored", &[noise_latent(2, 12, 12, 7, 1.0)]);
    let wrong_s = d.join("wrong.stats");
    assert_eq!(sh(&["fit-stats", "--manifest", p(&wrong), "--out", p(&wrong_s)]), 0);
    assert_eq!(sh(&["build", "--source", p(&wrong_s), "--target", p(&nat_s), "--out", p(&op)]), 3);
    assert_eq!(
        sh(&["transport", "--input", p(&d.join("wrong_0.npy")), "--operator", p(&ident), "--out", p(&out)]),
        3
    );
}

#[test]
fn singular_source_builds_stochastic_operator() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // 3 latents of 6x6 at p=5 give 12 patches for a 100-dimensional covariance
    let res: Vec<_> = (0..3).map(|i| noise_latent(4, 6, 6, i, 0.5)).collect();
    let nat: Vec<_> = (0..10).map(|i| noise_latent(4, 30, 30, 50 + i, 1.0)).collect();
    let (res_m, nat_m) = (write_set(d, "res", "restored", &res), write_set(d, "nat", "natural", &nat));
    let (res_s, nat_s) = (d.join("res.stats"), d.join("nat.stats"));
    assert_eq!(sh(&["fit-stats", "--manifest", p(&res_m), "--patch-size", "5", "--out", p(&res_s)]), 0);
    assert_eq!(sh(&["fit-stats", "--manifest", p(&nat_m), "--patch-size", "5", "--out", p(&nat_s)]), 0);
    let op = d.join("op");
    assert_eq!(
        sh(&["build", "--source", p(&res_s), "--target", p(&nat_s), "--patch-size", "5", "--out", p(&op)]),
        0
    );
    assert_eq!(io::load_operator(&op).unwrap().kind(), TransportKind::Stochastic);

    let input = d.join("res_0.npy");
    let run_with = |seed: &str, threads: &str, out: &Path| {
        sh(&["--threads", threads, "transport", "--input", p(&input), "--operator", p(&op), "--seed", seed, "--out", p(out)])
    };
    let (a, b, c) = (d.join("a.npy"), d.join("b.npy"), d.join("c.npy"));
    assert_eq!(run_with("7", "1", &a), 0);
    assert_eq!(run_with("7", "3", &b), 0);
    assert_eq!(run_with("8", "1", &c), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn interpolate_endpoints_and_clamping() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (star, hat0) = (d.join("star.npy"), d.join("hat0.npy"));
    io::write_tensor(&star, &LatentTensor::filled(3, 4, 4, 0.8), Dtype::F64).unwrap();
    io::write_tensor(&hat0, &LatentTensor::filled(3, 4, 4, 0.3), Dtype::F64).unwrap();
    let out = d.join("out.npy");
    let blend = |alpha: &str| {
        let code = sh(&["interpolate", "--x-star", p(&star), "--x-hat0", p(&hat0), "--alpha", alpha, "--dtype", "f64", "--out", p(&out)]);
        (code, io::read_tensor(&out).ok())
    };
    let value = |alpha: &str| {
        let (code, t) = blend(alpha);
        assert_eq!(code, 0);
        let t = t.unwrap();
        assert!(t.data().iter().all(|v| *v == t.data()[0]));
        t.data()[0]
    };
    assert_eq!(value("1"), 0.8);
    assert_eq!(value("0"), 0.3);
    assert_eq!(value("0.5"), 0.55);
    // 2·0.8 − 0.3 = 1.3 → 1;  2·0.3 − 0.8 = −0.2 → 0
    assert_eq!(value("2"), 1.0);
    assert_eq!(value("-1"), 0.0);
    assert_eq!(blend("2.5").0, 3);

    let other = d.join("other.npy");
    io::write_tensor(&other, &LatentTensor::filled(3, 4, 5, 0.3), Dtype::F64).unwrap();
    assert_eq!(
        sh(&["interpolate", "--x-star", p(&star), "--x-hat0", p(&other), "--alpha", "0.5", "--out", p(&out)]),
        3
    );
}

fn image(seed: u64, blur: bool) -> LatentTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..3 * 10 * 10).map(|_| rng.random::<f64>()).collect();
    let t = LatentTensor::new(3, 10, 10, raw).unwrap();
    if !blur {
        return t;
    }
    LatentTensor::from_fn(3, 10, 10, |c, y, x| {
        let xs = [x.saturating_sub(1), x, (x + 1).min(9)];
        xs.iter().map(|&xx| t.get(c, y, xx)).sum::<f64>() / 3.0
    })
    .unwrap()
}

#[test]
fn sweep_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let truth: Vec<_> = (0..4).map(|i| image(i, false)).collect();
    let star: Vec<_> = (0..4).map(|i| image(i, true)).collect();
    let reference: Vec<_> = (10..16).map(|i| image(i, false)).collect();
    let truth_m = write_set(d, "truth", "natural", &truth);
    let star_m = write_set(d, "star", "restored", &star);
    let ref_m = write_set(d, "ref", "natural", &reference);

    let (star_s, ref_s, op) = (d.join("star.stats"), d.join("ref.stats"), d.join("op"));
    assert_eq!(sh(&["fit-stats", "--manifest", p(&star_m), "--out", p(&star_s)]), 0);
    assert_eq!(sh(&["fit-stats", "--manifest", p(&ref_m), "--out", p(&ref_s)]), 0);
    assert_eq!(
        sh(&["build", "--source", p(&star_s), "--target", p(&ref_s), "--channels", "3", "--out", p(&op)]),
        0
    );

    let csv = d.join("curve.csv");
    let base = [
        "sweep", "--x-star", p(&star_m), "--operator", p(&op), "--reference", p(&ref_m), "--truth", p(&truth_m),
    ];
    let mut args = base.to_vec();
    args.extend(["--out", p(&csv)]);
    assert_eq!(sh(&args), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], CURVE_CSV_HEADER);
    assert_eq!(lines.len(), 17);
    assert!(lines[1].starts_with("-1,"));
    assert!(lines[16].starts_with("2,"));

    // alpha = 1 reproduces the untouched estimates
    let mut args = base.to_vec();
    args.extend(["--alphas", "1", "--out", p(&csv)]);
    assert_eq!(sh(&args), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let direct: f64 = star.iter().zip(&truth).map(|(s, t)| mse(s, t).unwrap()).sum::<f64>() / 4.0;
    assert!((row[1].parse::<f64>().unwrap() - direct).abs() <= 1e-12 * direct);
    assert_eq!(row[4], "gelbrich");

    let mut args = base.to_vec();
    args.extend(["--alphas", "3", "--out", p(&csv)]);
    assert_eq!(sh(&args), 3);
    assert_eq!(
        sh(&["sweep", "--x-star", p(&star_m), "--reference", p(&ref_m), "--out", p(&csv)]),
        2
    );
}

#[test]
fn gmm_demo_configs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = d.join("bad.toml");
    std::fs::write(&bad, "[noise]\nsigma = -1.0\n").unwrap();
    assert_eq!(sh(&["gmm-demo", "--config", p(&bad), "--out", p(&d.join("bad"))]), 3);

    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/gmm_default.toml")).unwrap();
    let bad_weights = text.replacen("weight = 0.3", "weight = 0.35", 1);
    std::fs::write(&bad, bad_weights).unwrap();
    assert_eq!(sh(&["gmm-demo", "--config", p(&bad), "--out", p(&d.join("bad"))]), 3);

    let small = text
        .replace("n = 100000", "n = 3000")
        .replace("w2_points = 2048", "w2_points = 512")
        .replacen("sigma = ", "sigma = 1e-6 # was ", 1);
    let cfg = d.join("small.toml");
    std::fs::write(&cfg, small).unwrap();
    let out = d.join("demo");
    assert_eq!(sh(&["gmm-demo", "--config", p(&cfg), "--out", p(&out)]), 0);
    for f in ["x.csv", "y.csv", "x_star.csv", "posterior.csv", "x_hat0.csv", "curve.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let x = std::fs::read_to_string(out.join("x.csv")).unwrap();
    assert!(x.starts_with("x,y\n"));
    assert_eq!(x.lines().count(), 3001);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["mse_mmse"].as_f64().unwrap() < 1e-10);
    assert!(summary["w2_hat0"].as_f64().unwrap() < 1e-4);
    assert!(summary["w2_mmse"].as_f64().unwrap() < 1e-4);
    let curve = std::fs::read_to_string(out.join("curve.csv")).unwrap();
    for row in curve.lines().skip(1) {
        let cells: Vec<f64> = row.split(',').take(4).filter(|c| !c.is_empty()).map(|c| c.parse().unwrap()).collect();
        assert!(cells[1] < 1e-10 && cells[2] < 1e-4, "{row}");
    }
}
