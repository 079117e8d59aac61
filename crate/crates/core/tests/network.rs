use qanet_core::nn::{
    backward, forward, make_batch, mse_loss, predict, prepare, ArchConfig, InputEncoding, Mode, ModelParams, OptimizerKind,
    PreparedPair, TrainConfig, Trainer, Variant,
};
use qanet_core::rng;
use qanet_core::seg::{instance_to_trinary, InstanceMap, IntensityImage};
use rand::Rng;

fn small(variant: Variant, encoding: InputEncoding, features: [usize; 2]) -> ArchConfig {
    ArchConfig {
        input_size: 8,
        n_blocks: 2,
        features_per_block: features.to_vec(),
        fc_widths: vec![6],
        ..ArchConfig::desk(variant, encoding)
    }
}

fn random_pairs(seed: u64, n: usize, side: usize) -> Vec<PreparedPair> {
    let mut r = rng::stream(seed, 200);
    (0..n)
        .map(|_| PreparedPair {
            image: (0..side * side).map(|_| r.random::<f32>()).collect(),
            classes: (0..side * side).map(|_| r.random_range(0..3u8)).collect(),
        })
        .collect()
}

fn randomize(params: &mut ModelParams<f64>, seed: u64) {
    let mut r = rng::stream(seed, 201);
    for i in 0..params.tensors().len() {
        let name = params.graph().specs[i].name.clone();
        for v in params.tensor_mut(i) {
            if name.ends_with("running_var") {
                *v = r.random_range(0.5..2.0);
            } else if !name.ends_with(".weight") {
                *v += r.random_range(-0.5..0.5);
            }
        }
    }
}

/// Tensor `[c, side, side]` as nested vectors.
type Planes = Vec<Vec<Vec<f64>>>;

/// Stride-2, pad-1, 3×3 convolution written as plain loops.
fn conv(input: &Planes, w: &[f64], out_c: usize) -> Planes {
    let (in_c, side) = (input.len(), input[0].len());
    let out_side = side.div_ceil(2);
    let mut out = vec![vec![vec![0.0; out_side]; out_side]; out_c];
    for (o, plane) in out.iter_mut().enumerate() {
        for (oy, row) in plane.iter_mut().enumerate() {
            for (ox, v) in row.iter_mut().enumerate() {
                for (c, inp) in input.iter().enumerate() {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let (y, x) = ((2 * oy + ky) as isize - 1, (2 * ox + kx) as isize - 1);
                            if y < 0 || x < 0 || y >= side as isize || x >= side as isize {
                                continue;
                            }
                            *v += w[((o * in_c + c) * 3 + ky) * 3 + kx] * inp[y as usize][x as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

fn add(a: &Planes, b: &Planes) -> Planes {
    a.iter()
        .zip(b)
        .map(|(pa, pb)| pa.iter().zip(pb).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect()).collect())
        .collect()
}

/// Batch norm (batch statistics or running statistics) followed by ReLU, across a batch.
fn bn_relu(batch: &[Planes], p: &ModelParams<f64>, name: &str, train: bool) -> Vec<Planes> {
    let t = |s: &str| p.tensor_by_name(&format!("{name}.bn.{s}")).unwrap().to_vec();
    let (gamma, beta, rm, rv) = (t("gamma"), t("beta"), t("running_mean"), t("running_var"));
    let mut out = batch.to_vec();
    for c in 0..batch[0].len() {
        let vals: Vec<f64> = batch.iter().flat_map(|s| s[c].iter().flatten().copied()).collect();
        let (mean, var) = if train {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            (m, vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64)
        } else {
            (rm[c], rv[c])
        };
        for s in &mut out {
            for v in s[c].iter_mut().flatten() {
                *v = (gamma[c] * (*v - mean) / (var + 1e-5).sqrt() + beta[c]).max(0.0);
            }
        }
    }
    out
}

fn node(inputs: &[(&[Planes], &str)], p: &ModelParams<f64>, name: &str, out_c: usize, train: bool) -> Vec<Planes> {
    let n = inputs[0].0.len();
    let pre: Vec<Planes> = (0..n)
        .map(|i| {
            inputs
                .iter()
                .map(|(src, w)| conv(&src[i], p.tensor_by_name(&format!("{name}.{w}")).unwrap(), out_c))
                .reduce(|a, b| add(&a, &b))
                .unwrap()
        })
        .collect();
    bn_relu(&pre, p, name, train)
}

fn planes(flat: &[f32], c: usize, side: usize) -> Planes {
    (0..c)
        .map(|k| (0..side).map(|y| (0..side).map(|x| flat[(k * side + y) * side + x] as f64).collect()).collect())
        .collect()
}

fn onehot(classes: &[u8], side: usize) -> Planes {
    (0..3u8)
        .map(|k| (0..side).map(|y| (0..side).map(|x| (classes[y * side + x] == k) as u8 as f64).collect()).collect())
        .collect()
}

fn reference_ribcage(p: &ModelParams<f64>, pairs: &[PreparedPair], train: bool) -> Vec<f64> {
    let f = &p.arch().features_per_block;
    let r0_1: Vec<Planes> = pairs.iter().map(|q| planes(&q.image, 1, 8)).collect();
    let r0_2: Vec<Planes> = pairs.iter().map(|q| onehot(&q.classes, 8)).collect();
    let r1_1 = node(&[(&r0_1, "weight")], p, "block1.rib1", f[0], train);
    let r1_2 = node(&[(&r0_2, "weight")], p, "block1.rib2", f[0], train);
    let s1 = node(&[(&r0_1, "rib1_weight"), (&r0_2, "rib2_weight")], p, "block1.spine", f[0], train);
    let s2 = node(
        &[(&s1, "spine_weight"), (&r1_1, "rib1_weight"), (&r1_2, "rib2_weight")],
        p,
        "block2.spine",
        f[1],
        train,
    );
    let dense = |x: &[f64], name: &str, relu: bool| -> Vec<f64> {
        let w = p.tensor_by_name(&format!("{name}.weight")).unwrap();
        let b = p.tensor_by_name(&format!("{name}.bias")).unwrap();
        (0..b.len())
            .map(|o| {
                let v = b[o] + (0..x.len()).map(|i| w[o * x.len() + i] * x[i]).sum::<f64>();
                if relu { v.max(0.0) } else { v }
            })
            .collect()
    };
    s2.iter()
        .map(|s| {
            let flat: Vec<f64> = s.iter().flatten().flatten().copied().collect();
            dense(&dense(&flat, "fc1", true), "out", false)[0]
        })
        .collect()
}

#[test]
fn ribcage_forward_matches_direct_convolution() {
    let arch = small(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch, [2, 2]);
    for seed in 0..4 {
        let mut params = ModelParams::<f64>::init(&arch, seed).unwrap();
        randomize(&mut params, seed);
        let pairs = random_pairs(seed, 3, 8);
        let refs: Vec<&PreparedPair> = pairs.iter().collect();
        let batch = make_batch::<f64>(&arch, &refs);
        for (mode, train) in [(Mode::Train, true), (Mode::Eval, false)] {
            let (out, _) = forward(&params, &batch, mode).unwrap();
            let want = reference_ribcage(&params, &pairs, train);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-5 * b.abs().max(1e-3), "{mode:?}: {a} vs {b}");
            }
        }
        // f32 network against the f64 reference
        let p32 = params.cast::<f32>();
        let (out32, _) = forward(&p32, &make_batch::<f32>(&arch, &refs), Mode::Eval).unwrap();
        let want = reference_ribcage(&params, &pairs, false);
        for (a, b) in out32.iter().zip(&want) {
            assert!((*a as f64 - b).abs() <= 1e-4 * b.abs().max(1e-2), "{a} vs {b}");
        }
    }
}

#[test]
fn zero_network_outputs_zero() {
    for v in Variant::ALL {
        let arch = small(v, InputEncoding::TrinaryOnehot3ch, [4, 4]);
        let params = ModelParams::<f32>::zeros(&arch).unwrap();
        let pairs = random_pairs(1, 4, 8);
        let refs: Vec<&PreparedPair> = pairs.iter().collect();
        for mode in [Mode::Train, Mode::Eval] {
            let (out, _) = forward(&params, &make_batch(&arch, &refs), mode).unwrap();
            assert!(out.iter().all(|&q| q == 0.0), "{v}: {out:?}");
        }
    }
}

#[test]
fn zero_output_gradient_gives_zero_gradients() {
    for v in Variant::ALL {
        let arch = small(v, InputEncoding::Binary1ch, [4, 4]);
        let params = ModelParams::<f32>::init(&arch, 3).unwrap();
        let pairs = random_pairs(2, 3, 8);
        let refs: Vec<&PreparedPair> = pairs.iter().collect();
        let (_, cache) = forward(&params, &make_batch(&arch, &refs), Mode::Train).unwrap();
        assert!(backward(&params, &cache, &[0.0; 3]).unwrap().is_zero());
    }
}

#[test]
fn backward_rejects_eval_and_foreign_caches() {
    let arch = small(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch, [4, 4]);
    let params = ModelParams::<f32>::init(&arch, 0).unwrap();
    let pairs = random_pairs(0, 2, 8);
    let refs: Vec<&PreparedPair> = pairs.iter().collect();
    let batch = make_batch(&arch, &refs);
    let (_, eval_cache) = forward(&params, &batch, Mode::Eval).unwrap();
    assert!(backward(&params, &eval_cache, &[1.0, 1.0]).is_err());
    let (_, cache) = forward(&params, &batch, Mode::Train).unwrap();
    assert!(backward(&params, &cache, &[1.0]).is_err());
    let other = ModelParams::<f32>::init(&small(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch, [2, 4]), 0).unwrap();
    assert!(backward(&other, &cache, &[1.0, 1.0]).is_err());
}

#[test]
fn rib_gradient_reaches_image_rib_through_the_spine() {
    let arch = small(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch, [4, 4]);
    let params = ModelParams::<f64>::init(&arch, 9).unwrap();
    let pairs = random_pairs(9, 4, 8);
    let refs: Vec<&PreparedPair> = pairs.iter().collect();
    let (out, cache) = forward(&params, &make_batch(&arch, &refs), Mode::Train).unwrap();
    let (_, d) = mse_loss(&out, &[0.1, 0.4, 0.7, 0.9]);
    let g = backward(&params, &cache, &d).unwrap();
    // the head reads only the last spine, so these rib weights matter only via the spine
    for name in ["block1.rib1.weight", "block1.rib2.weight", "block2.spine.rib1_weight"] {
        let i = params.index_of(name).unwrap();
        assert!(g.tensors[i].iter().any(|&v| v != 0.0), "{name}");
    }
    // the last ribs feed nothing
    let last = params.index_of("block2.rib1.weight").unwrap();
    assert!(g.tensors[last].iter().all(|&v| v == 0.0));
}

#[test]
fn prediction_ignores_instance_ids() {
    let arch = small(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch, [4, 4]);
    let params = ModelParams::<f32>::init(&arch, 4).unwrap();
    let mut labels = vec![0u16; 64];
    for (i, l) in labels.iter_mut().enumerate() {
        let (x, y) = (i % 8, i / 8);
        *l = match (x < 4, y < 4) {
            (true, true) => 3,
            (false, true) => 7,
            (true, false) if x > 0 => 12,
            _ => 0,
        };
    }
    let a = InstanceMap::from_labels(8, 8, labels.clone()).unwrap();
    let b = a.map_labels(|l| match l {
        3 => 40,
        7 => 2,
        12 => 5,
        other => other,
    });
    let img = IntensityImage::new(8, 8, 1, (0..64).map(|i| i as f32 / 64.0).collect()).unwrap();
    let pa = prepare(&arch, &img, &instance_to_trinary(&a)).unwrap();
    let pb = prepare(&arch, &img, &instance_to_trinary(&b)).unwrap();
    let qa = predict(&params, &make_batch(&arch, &[&pa])).unwrap();
    let qb = predict(&params, &make_batch(&arch, &[&pb])).unwrap();
    assert_eq!(qa[0].to_bits(), qb[0].to_bits());
}

#[test]
fn eval_forward_is_pure() {
    let arch = small(Variant::Siamese, InputEncoding::TrinaryOnehot3ch, [4, 4]);
    let params = ModelParams::<f32>::init(&arch, 5).unwrap();
    let pairs = random_pairs(5, 5, 8);
    let refs: Vec<&PreparedPair> = pairs.iter().collect();
    let batch = make_batch(&arch, &refs);
    let a = predict(&params, &batch).unwrap();
    let b = predict(&params, &batch).unwrap();
    assert_eq!(a, b);
    // per-sample evaluation agrees with batched evaluation in eval mode
    for (i, p) in refs.iter().enumerate() {
        let one = predict(&params, &make_batch(&arch, &[*p])).unwrap();
        assert!((one[0] - a[i]).abs() < 1e-6);
    }
}

#[test]
fn batch_norm_contract_in_train_mode() {
    let arch = small(Variant::Naive, InputEncoding::TrinaryOnehot3ch, [4, 4]);
    let mut params = ModelParams::<f64>::init(&arch, 6).unwrap();
    // large positive shift so ReLU passes every value through
    for i in 0..params.tensors().len() {
        let name = params.graph().specs[i].name.clone();
        if name.ends_with("bn.beta") {
            params.tensor_mut(i).iter_mut().enumerate().for_each(|(c, v)| *v = 50.0 + c as f64);
        }
        if name.ends_with("bn.gamma") {
            params.tensor_mut(i).iter_mut().enumerate().for_each(|(c, v)| *v = 0.5 + c as f64);
        }
    }
    let pairs = random_pairs(6, 4, 8);
    let refs: Vec<&PreparedPair> = pairs.iter().collect();
    let (_, cache) = forward(&params, &make_batch(&arch, &refs), Mode::Train).unwrap();
    for (k, node) in params.graph().nodes.iter().enumerate() {
        let out = cache.node_output(k);
        let plane = node.out_side * node.out_side;
        let co = node.out_channels;
        let gamma = params.tensor(node.gamma);
        let beta = params.tensor(node.beta);
        for c in 0..co {
            let vals: Vec<f64> = (0..4).flat_map(|i| out[(i * co + c) * plane..][..plane].to_vec()).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            let (_, bvar) = cache.batch_stats(k);
            let want_var = gamma[c].powi(2) * bvar[c] / (bvar[c] + 1e-5);
            assert!((m - beta[c]).abs() < 1e-5, "mean {m} vs {}", beta[c]);
            assert!((v - want_var).abs() < 1e-5 * want_var.max(1.0), "var {v} vs {want_var}");
            assert!((v - gamma[c].powi(2)).abs() < 1e-3 * gamma[c].powi(2));
        }
    }
}

#[test]
fn running_stats_converge_to_fixed_batch_stats() {
    let arch = small(Variant::Ribcage, InputEncoding::Binary1ch, [4, 4]);
    let mut params = ModelParams::<f64>::init(&arch, 7).unwrap();
    let pairs = random_pairs(7, 4, 8);
    let refs: Vec<&PreparedPair> = pairs.iter().collect();
    let batch = make_batch(&arch, &refs);
    for _ in 0..300 {
        let (_, cache) = forward(&params, &batch, Mode::Train).unwrap();
        cache.update_running_stats(&mut params, 0.9).unwrap();
    }
    let (train_out, cache) = forward(&params, &batch, Mode::Train).unwrap();
    for (k, node) in params.graph().nodes.iter().enumerate() {
        let (m, v) = cache.batch_stats(k);
        for c in 0..node.out_channels {
            assert!((params.tensor(node.running_mean)[c] - m[c]).abs() < 1e-9);
            assert!((params.tensor(node.running_var)[c] - v[c]).abs() < 1e-9 * v[c].max(1.0));
        }
    }
    let (eval_out, _) = forward(&params, &batch, Mode::Eval).unwrap();
    for (a, b) in train_out.iter().zip(&eval_out) {
        assert!((a - b).abs() < 1e-7);
    }
    let (_, eval_cache) = forward(&params, &batch, Mode::Eval).unwrap();
    assert!(eval_cache.update_running_stats(&mut params, 0.9).is_err());
}

#[test]
fn memorizes_a_single_sample() {
    for v in Variant::ALL {
        let arch = ArchConfig {
            input_size: 16,
            ..small(v, InputEncoding::TrinaryOnehot3ch, [8, 8])
        };
        let mut params = ModelParams::<f32>::init(&arch, 11).unwrap();
        let pair = random_pairs(11, 1, 16).remove(0);
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(cfg, &params).unwrap();
        let mut loss = f64::INFINITY;
        for _ in 0..200 {
            loss = trainer.step(&mut params, &[&pair], &[0.63]).unwrap();
        }
        assert!(loss < 1e-3, "{v}: loss {loss}");
    }
}

#[test]
fn zero_learning_rate_epoch_keeps_weights() {
    let arch = small(Variant::Ribcage, InputEncoding::TrinaryOnehot3ch, [4, 4]);
    let mut params = ModelParams::<f32>::init(&arch, 12).unwrap();
    let before = params.clone();
    let pairs = random_pairs(12, 8, 8);
    let q: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        batch_size: 3,
        epochs: 1,
        ..TrainConfig::default()
    };
    for kind in [OptimizerKind::Adam, OptimizerKind::SgdMomentum] {
        let mut p = params.clone();
        let mut trainer = Trainer::new(TrainConfig { optimizer: kind, ..cfg.clone() }, &p).unwrap();
        trainer.train_epoch(&mut p, &pairs, &q).unwrap();
        for (i, spec) in p.graph().specs.iter().enumerate() {
            if spec.kind.trainable() {
                assert_eq!(p.tensor(i), before.tensor(i), "{}", spec.name);
            }
        }
    }
    let mut trainer = Trainer::new(cfg, &params).unwrap();
    trainer.train_epoch(&mut params, &pairs, &q).unwrap();
}

#[test]
fn training_is_deterministic() {
    let arch = small(Variant::Naive, InputEncoding::Binary1ch, [4, 4]);
    let pairs = random_pairs(13, 20, 8);
    let q: Vec<f64> = (0..20).map(|i| (i % 7) as f64 / 7.0).collect();
    let run = || {
        let mut p = ModelParams::<f32>::init(&arch, 13).unwrap();
        let cfg = TrainConfig {
            batch_size: 6,
            epochs: 3,
            seed: 13,
            ..TrainConfig::default()
        };
        let mut t = Trainer::new(cfg, &p).unwrap();
        let hist = t
            .fit::<qanet_core::nn::NetError>(&mut p, (&pairs[..14], &q[..14]), (&pairs[14..], &q[14..]), |_, _| Ok(()))
            .unwrap();
        (p, hist)
    };
    let (p1, h1) = run();
    let (p2, h2) = run();
    assert_eq!(p1, p2);
    assert_eq!(h1, h2);
    assert_eq!(h1.len(), 3);
}
