//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use bitrobust::channel::{corrupt_bits, corrupt_bundle, BitStream, BscChannel, InjectionTarget};
use bitrobust::codec::{half_decode, half_encode, index_to_word, BitWord, CodecKind, CodecSpec};
use bitrobust::distortion::{distortion_profile, hdb_bound, Exact, Method, Mode, Neighborhood};
use bitrobust::harness::{csv_string, parity_variant, run_sweep, spearman, ParityBudget, SweepConfig, SweepResult};
use bitrobust::model::{
    format, quantize_model, softmax, train_toy, FloatModel, FloatTensor, GridPolicy, Layer, Mlp, Network, ToyConfig,
    INPUT_SHAPE_KEY,
};
use bitrobust::nulling::{parity_encode, parity_ok};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

fn d_max1(kind: CodecKind, q: u32) -> Exact {
    let spec = CodecSpec::new(kind, q, false).unwrap();
    distortion_profile(&spec, 1, Neighborhood::Ball, Method::Exhaustive).unwrap().value(Mode::Max).exact.unwrap()
}

fn c1_half_example() -> Outcome {
    let word = BitWord::from_msb_str("0 01101 0101010101").unwrap();
    let third = half_decode(&word).unwrap();
    let flipped = half_decode(&word.flipped(1 << 14)).unwrap();
    check(
        third == 0.333251953125 && flipped == 21840.0,
        format!("decode = {third}, bit 14 flipped = {flipped}"),
    )
}

fn c2_half_max() -> Outcome {
    let w = half_encode(65504.0).map_err(|e| e.to_string())?;
    let back = half_decode(&w).unwrap();
    check(back == 65504.0 && w.bits() == 0x7bff, format!("65504 -> {:#06x} -> {back}", w.bits()))
}

fn c3_distortion_fixtures() -> Outcome {
    let binary_ok = (2..=10).all(|q| d_max1(CodecKind::BinaryExpansion, q) == Ratio::new(1, 2));
    let gray2 = d_max1(CodecKind::GrayCode, 2);
    let ranked3 = CodecSpec::new(CodecKind::HammingRanked, 3, false).unwrap();
    let order: Vec<String> = (0..8).map(|i| index_to_word(&ranked3, i).unwrap().to_string()).collect();
    let order_ok = order == ["000", "001", "010", "100", "011", "101", "110", "111"];
    let h3 = d_max1(CodecKind::HammingRanked, 3);
    let h4 = d_max1(CodecKind::HammingRanked, 4);

    // independent oracle: 16 words x 4 single flips over the sorted word list
    let mut words: Vec<u64> = (0..16).collect();
    words.sort_by_key(|&w| (w.count_ones(), w));
    let index_of = |w: u64| words.iter().position(|&x| x == w).unwrap() as i64;
    let oracle = (0..16u64)
        .flat_map(|w| (0..4).map(move |j| (w, w ^ 1 << j)))
        .map(|(a, b)| (index_of(a) - index_of(b)).unsigned_abs())
        .max()
        .unwrap();
    check(
        binary_ok
            && gray2 == Ratio::new(3, 4)
            && order_ok
            && h3 == Ratio::new(1, 2)
            && h4 == Ratio::new(7, 16)
            && Ratio::new(u128::from(oracle), 16) == h4,
        format!("binary q=2..10 all 1/2: {binary_ok}; gray q=2 {gray2}; ranked q=3 order ok: {order_ok}, {h3}; ranked q=4 {h4} (oracle {oracle}/16)"),
    )
}

fn c4_bound_trend() -> Outcome {
    let mut prev = Ratio::from_integer(1);
    let mut notes = Vec::new();
    let mut ok = true;
    for q in [4u32, 6, 8, 10, 12] {
        let d = d_max1(CodecKind::HammingRanked, q);
        let bound = hdb_bound(q).unwrap().0;
        let binary = d_max1(CodecKind::BinaryExpansion, q);
        ok &= d <= bound && d <= prev && binary == Ratio::new(1, 2);
        notes.push(format!("q={q}: {d} <= {bound}"));
        prev = d;
    }
    check(ok, notes.join("; "))
}

fn c5_parity() -> Outcome {
    for q in 2..=12u32 {
        for data in 0..1u64 << (q - 1) {
            let word = parity_encode(&BitWord::new(q - 1, data).unwrap()).unwrap();
            for e in 0..1u64 << q {
                if parity_ok(&word.flipped(e)) != (e.count_ones() % 2 == 0) {
                    return Err(format!("q={q} data={data:b} pattern={e:b} misclassified"));
                }
            }
        }
    }
    let (p, words) = (0.01, 200_000usize);
    let (noisy, _) = corrupt_bits(&BitStream::zeros(16 * words), &BscChannel::new(p, 5).unwrap(), 0);
    let nulled = (0..words).filter(|&w| noisy.read(16 * w, 16).count_ones() % 2 == 1).count();
    let expect = 1.0 - (1.0 + (1.0 - 2.0 * p).powi(16)) / 2.0;
    let se = (expect * (1.0 - expect) / words as f64).sqrt();
    let got = nulled as f64 / words as f64;
    let z = (got - expect) / se;
    check(
        z.abs() < 5.0,
        format!("exhaustive q<=12 ok; nulled {got:.5} vs {expect:.5} over {words} words (z = {z:.2})"),
    )
}

fn geometric_grid() -> Vec<f64> {
    std::iter::once(0.0).chain((0..15).map(|j| 5e-4 * 2f64.powf(j as f64 / 2.0))).collect()
}

fn fmt_r(r: Option<f64>) -> String {
    r.map_or("undefined".into(), |v| format!("{v:.4}"))
}

fn sweep_pair(model: &FloatModel, policy: GridPolicy, cfg: &SweepConfig, data: &bitrobust::model::LabeledDataset) -> (SweepResult, SweepResult) {
    let spec = CodecSpec::new(CodecKind::BinaryExpansion, 16, false).unwrap();
    let plain = quantize_model(model, spec, policy).unwrap();
    let checked = parity_variant(&plain, ParityBudget::EqualStorage).unwrap();
    assert_eq!(plain.stored_bits(), checked.stored_bits());
    (run_sweep(&plain, data, cfg).unwrap(), run_sweep(&checked, data, cfg).unwrap())
}

fn c6_desk_experiment() -> Outcome {
    let toy = train_toy(&ToyConfig { hidden: 256, dims: 64, ..ToyConfig::default() }).map_err(|e| e.to_string())?;
    if toy.test_accuracy < 0.95 {
        return Err(format!("toy held-out accuracy {} < 0.95", toy.test_accuracy));
    }
    let mut cfg = SweepConfig::new(geometric_grid(), 2024);
    cfg.trials = 20;
    let (plain, checked) = sweep_pair(&toy.model, GridPolicy::Global, &cfg, &toy.test);

    let exact_zero = [&plain, &checked].iter().all(|r| r.points[0].mean_accuracy == r.baseline_accuracy);
    let rho = |r: &SweepResult| {
        let rates: Vec<f64> = r.points.iter().map(|p| p.rber).collect();
        let means: Vec<f64> = r.points.iter().map(|p| p.mean_accuracy).collect();
        spearman(&rates, &means).unwrap_or(0.0)
    };
    let (rho_plain, rho_checked) = (rho(&plain), rho(&checked));
    let gain = match (checked.robustness, plain.robustness) {
        (Some(c), Some(p)) => c >= p,
        (Some(_), None) | (None, None) => true,
        (None, Some(_)) => false,
    };

    let (tp, tc) = sweep_pair(&toy.model, GridPolicy::PerTensor, &cfg, &toy.test);
    println!(
        "    per-tensor grids (informational): R(0.95) {} without nulling, {} with",
        fmt_r(tp.robustness),
        fmt_r(tc.robustness)
    );
    check(
        exact_zero && rho_plain <= 0.0 && rho_checked <= 0.0 && gain,
        format!(
            "held-out {:.4}; (a) rate-0 mean == baseline: {exact_zero}; (b) spearman {rho_plain:.3} / {rho_checked:.3}; \
             (c) R(0.95) {} without nulling, {} with (global grid, 16 stored bits, 20 trials)",
            toy.test_accuracy,
            fmt_r(plain.robustness),
            fmt_r(checked.robustness)
        ),
    )
}

fn c7_published_robustness() -> Outcome {
    let means = [
        0.9959, 0.9952, 0.9945, 0.9937, 0.9924, 0.9906, 0.9885, 0.9847, 0.9816, 0.9754, 0.96952, 0.9576, 0.94875,
        0.9339, 0.9224,
    ];
    let curve: Vec<(f64, f64)> = means.iter().enumerate().map(|(i, &m)| (i as f64 / 1000.0, m)).collect();
    let r = bitrobust::harness::robustness_from_means(0.9961, &curve, 0.95);
    check(r == Some(0.012), format!("R(0.95) = {}", fmt_r(r)))
}

fn c8_engine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let u = |n: usize, rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
    for case in 0..100 {
        let (kh, kw, cin, cout) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4));
        let (h, w) = (kh + rng.gen_range(0..5), kw + rng.gen_range(0..5));
        let (oh, ow) = (h - kh + 1, w - kw + 1);
        let n_out = rng.gen_range(1..6);
        let kernel = u(kh * kw * cin * cout, &mut rng);
        let cbias = u(cout, &mut rng);
        let dense_w = u(n_out * oh * ow * cout, &mut rng);
        let dense_b = u(n_out, &mut rng);
        let x = u(h * w * cin, &mut rng);
        let mut metadata = BTreeMap::new();
        metadata.insert(INPUT_SHAPE_KEY.to_string(), format!("{h},{w},{cin}"));
        let model = FloatModel {
            layers: vec![
                Layer::Conv2d { kernels: "k".into(), bias: "kb".into() },
                Layer::Flatten,
                Layer::Dense { weights: "w".into(), bias: "b".into() },
            ],
            tensors: vec![
                FloatTensor::new("k", vec![kh, kw, cin, cout], kernel.clone()).unwrap(),
                FloatTensor::new("kb", vec![cout], cbias.clone()).unwrap(),
                FloatTensor::new("w", vec![n_out, oh * ow * cout], dense_w.clone()).unwrap(),
                FloatTensor::new("b", vec![n_out], dense_b.clone()).unwrap(),
            ],
            metadata,
        };
        let mut feat = Vec::with_capacity(oh * ow * cout);
        for oy in 0..oh {
            for ox in 0..ow {
                for co in 0..cout {
                    let mut acc = cbias[co];
                    for ky in 0..kh {
                        for kx in 0..kw {
                            for ci in 0..cin {
                                acc += x[((oy + ky) * w + ox + kx) * cin + ci] * kernel[((ky * kw + kx) * cin + ci) * cout + co];
                            }
                        }
                    }
                    feat.push(acc);
                }
            }
        }
        let want: Vec<f64> = (0..n_out)
            .map(|o| feat.iter().enumerate().fold(dense_b[o], |a, (i, v)| a + dense_w[o * feat.len() + i] * v))
            .collect();
        let got = Network::from_float(&model).unwrap().forward(&x).unwrap();
        if got != want {
            return Err(format!("instance {case}: forward differs from reference"));
        }
    }

    let mlp = Mlp::init(4, 6, 3, &mut rng);
    let xs: Vec<Vec<f64>> = (0..5).map(|_| u(4, &mut rng)).collect();
    let ys = [0, 2, 1, 1, 0];
    let (_, grad) = mlp.loss_and_grad(&xs, &ys);
    let base = mlp.params();
    let mut probe = mlp.clone();
    let mut worst: f64 = 0.0;
    for (i, &g) in grad.iter().enumerate() {
        let mut at = |delta: f64| {
            let mut p = base.clone();
            p[i] += delta;
            probe.set_params(&p);
            probe.loss_and_grad(&xs, &ys).0
        };
        let numeric = (at(1e-6) - at(-1e-6)) / 2e-6;
        worst = worst.max((g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6));
    }

    let mut norm_err: f64 = 0.0;
    for _ in 0..100 {
        let logits: Vec<f64> = (0..10).map(|_| rng.gen_range(-500.0..500.0)).collect();
        norm_err = norm_err.max((softmax(&logits).iter().sum::<f64>() - 1.0).abs());
    }
    check(
        worst < 1e-4 && norm_err < 1e-9,
        format!("100 conv+dense instances exact; gradient rel. error {worst:.2e}; softmax sum error {norm_err:.1e}"),
    )
}

fn c9_determinism() -> Outcome {
    let toy = train_toy(&ToyConfig { samples: 600, hidden: 12, ..ToyConfig::default() }).map_err(|e| e.to_string())?;
    let spec = CodecSpec::new(CodecKind::HammingRanked, 16, true).unwrap();
    let bundle = quantize_model(&toy.model, spec, GridPolicy::PerTensor).unwrap();
    let channel = BscChannel::new(0.01, 99).unwrap();
    let corrupt = || format::to_bytes(&corrupt_bundle(&bundle, &channel, &InjectionTarget::all(3)).unwrap().0).unwrap();
    let bytes_same = corrupt() == corrupt();
    let mut cfg = SweepConfig::new(vec![0.0, 0.001, 0.01], 7);
    cfg.trials = 8;
    let csv = || csv_string(&run_sweep(&bundle, &toy.test, &cfg).unwrap()).unwrap();
    let csv_same = csv() == csv();
    check(bytes_same && csv_same, format!("corrupted bundle bytes identical: {bytes_same}; sweep CSV identical: {csv_same}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("half-precision example word", c1_half_example),
        ("half-precision maximum", c2_half_max),
        ("distortion fixtures", c3_distortion_fixtures),
        ("ranked codec bound and trend", c4_bound_trend),
        ("parity detection and nulled fraction", c5_parity),
        ("desk-scale robustness experiment", c6_desk_experiment),
        ("robustness of the published curve", c7_published_robustness),
        ("engine correctness", c8_engine),
        ("determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {}: {tag} {name} [{:.1}s] {detail}", n + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
