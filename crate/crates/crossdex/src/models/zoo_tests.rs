//! Behavioral tests of the model zoo against hand-derived cases.

use super::test_util::random_session;
use super::*;
use crate::numcore::{Graph, NodeId, Tensor};
use crate::windowing::Observation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn zero_params(model: &mut NetForecaster) {
    for t in model.params_mut() {
        for v in t.data_mut() {
            *v = 0.0;
        }
    }
}

/// Zero-epoch spec: train() only marks the model trained, so tests can
/// write parameters by hand afterwards and predict with them.
fn small_spec(kind: ModelKind, input_len: usize, output_len: usize) -> ForecasterSpec {
    let mut spec = ForecasterSpec::new(kind).with_lengths(input_len, output_len);
    spec.training.epochs = 0;
    spec
}

#[test]
fn mlp_parameter_count_follows_sizing_rule() {
    // 30·30+30 + 30·61+61 + 61·30+30 = 930 + 1891 + 1860 = 4681.
    let spec = ForecasterSpec::new(ModelKind::MlpLinear);
    let model = NetForecaster::new(spec).unwrap();
    assert_eq!(model.n_parameters(), 4681);
}

#[test]
fn linear_activation_net_is_a_composed_linear_map() {
    let mut spec = small_spec(ModelKind::MlpLinear, 5, 3);
    spec.seed = 4;
    spec.normalize = false;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 4, 1);
    model.train(&session).unwrap();

    let x = vec![1.5, -0.5, 2.0, 0.25, -1.0];
    let got = model.predict(&x).unwrap();

    // Hand-composed y = ((x W1 + b1) W2 + b2) W3 + b3.
    let p = model.params();
    let apply = |v: &[f64], w: &Tensor, b: &Tensor| -> Vec<f64> {
        let (rows, cols) = (w.rows(), w.cols());
        let mut out = b.data().to_vec();
        for j in 0..cols {
            for i in 0..rows {
                out[j] += v[i] * w.at(i, j);
            }
        }
        out
    };
    let h1 = apply(&x, &p[0], &p[1]);
    let h2 = apply(&h1, &p[2], &p[3]);
    let expect = apply(&h2, &p[4], &p[5]);
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn relu_net_with_dead_units_outputs_final_bias() {
    let mut spec = small_spec(ModelKind::MlpRelu, 4, 3);
    spec.normalize = false;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 4, 2);
    model.train(&session).unwrap();
    zero_params(&mut model);
    {
        let p = model.params_mut();
        // All-negative pre-activations in both hidden layers.
        for v in p[1].data_mut() {
            *v = -5.0;
        }
        for v in p[3].data_mut() {
            *v = -5.0;
        }
        p[5].data_mut().copy_from_slice(&[1.25, -2.5, 0.75]);
    }
    let got = model.predict(&[10.0, 20.0, 30.0, 40.0]).unwrap();
    assert_eq!(got, vec![1.25, -2.5, 0.75]);
}

#[test]
fn rbf_unit_at_center_emits_its_amplitude() {
    let mut spec = small_spec(ModelKind::Rbf, 4, 1);
    spec.normalize = false;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 4, 3);
    model.train(&session).unwrap();
    let x = vec![0.3, 0.7, 0.1, 0.9];
    let k = 2; // probe unit
    zero_params(&mut model);
    {
        let p = model.params_mut();
        for (j, v) in x.iter().enumerate() {
            p[0].set(k, j, *v); // center k = x
        }
        p[1].data_mut()[k] = 1.73; // amplitude a_k
        p[2].data_mut()[k] = 0.4; // any width
        p[3].set(k, 0, 1.0); // readout selects unit k
    }
    let got = model.predict(&x).unwrap();
    assert!((got[0] - 1.73).abs() < 1e-12, "{got:?}");
}

#[test]
fn rbf_width_to_zero_ignores_distance() {
    let mut spec = small_spec(ModelKind::Rbf, 4, 1);
    spec.normalize = false;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 4, 3);
    model.train(&session).unwrap();
    zero_params(&mut model);
    {
        let p = model.params_mut();
        for j in 0..4 {
            p[0].set(0, j, 100.0); // far center
        }
        p[1].data_mut()[0] = -0.6;
        p[2].data_mut()[0] = -45.0; // softplus(-45) ~ 3e-20
        p[3].set(0, 0, 1.0);
    }
    let got = model.predict(&[0.0, 0.0, 0.0, 0.0]).unwrap();
    assert!((got[0] - (-0.6)).abs() < 1e-12, "{got:?}");
}

#[test]
fn rbf_far_input_collapses_to_output_bias() {
    let mut spec = small_spec(ModelKind::Rbf, 4, 2);
    spec.normalize = false;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 4, 3);
    model.train(&session).unwrap();
    zero_params(&mut model);
    {
        let p = model.params_mut();
        // Centers at the origin, moderate widths, nonzero amplitudes
        // and readout; the exponential must still vanish.
        for k in 0..p[1].len() {
            p[1].data_mut()[k] = 1.0;
            p[2].data_mut()[k] = 0.55; // softplus(0.55) ~ 1.0
        }
        for v in p[3].data_mut() {
            *v = 1.0;
        }
        p[4].data_mut().copy_from_slice(&[7.0, -3.0]);
    }
    // ‖x − 0‖² = 4 * 400 = 1600, unit output < e^-1000 < 1e-300.
    let got = model.predict(&[20.0, 20.0, 20.0, 20.0]).unwrap();
    assert!(
        (got[0] - 7.0).abs() < 1e-12 && (got[1] + 3.0).abs() < 1e-12,
        "{got:?}"
    );
}

#[test]
fn kgate_zero_gates_halve_the_trunk() {
    let mut spec = small_spec(ModelKind::Kgate, 3, 2);
    spec.normalize = false;
    spec.seed = 9;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 4, 5);
    model.train(&session).unwrap();
    {
        let p = model.params_mut();
        // Zero every gate tensor (indices 2..8 per cell) and the trunk
        // biases, keeping the random trunk weights and output layer.
        for cell in [0usize, 8] {
            for idx in cell + 2..cell + 8 {
                for v in p[idx].data_mut() {
                    *v = 0.0;
                }
            }
            for v in p[cell + 1].data_mut() {
                *v = 0.0;
            }
        }
    }

    let x = vec![0.4, -1.2, 2.0];
    let got = model.predict(&x).unwrap();

    // Hand algebra: z_i = 0.5 · W_i x_i, then the output layer.
    let p = model.params();
    let lin = |v: &[f64], w: &Tensor| -> Vec<f64> {
        let (rows, cols) = (w.rows(), w.cols());
        let mut out = vec![0.0; cols];
        for j in 0..cols {
            for i in 0..rows {
                out[j] += v[i] * w.at(i, j);
            }
        }
        out
    };
    let z1: Vec<f64> = lin(&x, &p[0]).iter().map(|v| 0.5 * v).collect();
    let z2: Vec<f64> = lin(&z1, &p[8]).iter().map(|v| 0.5 * v).collect();
    let mut expect = lin(&z2, &p[16]);
    for (e, b) in expect.iter_mut().zip(p[17].data()) {
        *e += b;
    }
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn kgate_saturated_sigma_gate_passes_everything() {
    // With W_s x0 forced far positive, σ ≈ 1: the cell reduces to
    // trunk-plus-modulation within 1e-8.
    let mut spec = small_spec(ModelKind::Kgate, 3, 3);
    spec.normalize = false;
    spec.seed = 10;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 4, 6);
    model.train(&session).unwrap();
    {
        let p = model.params_mut();
        for cell in [0usize, 8] {
            // σ-gate bias +20, weights 0 -> sigma ~ 1 everywhere.
            for v in p[cell + 6].data_mut() {
                *v = 0.0;
            }
            for v in p[cell + 7].data_mut() {
                *v = 20.0;
            }
        }
    }
    let x = vec![0.2, -0.4, 0.9];
    let got = model.predict(&x).unwrap();

    // Same network with the sigma gate replaced by exact identity:
    // recompute by hand.
    let p = model.params();
    let lin = |v: &[f64], w: &Tensor, b: &Tensor| -> Vec<f64> {
        let (rows, cols) = (w.rows(), w.cols());
        let mut out = b.data().to_vec();
        for j in 0..cols {
            for i in 0..rows {
                out[j] += v[i] * w.at(i, j);
            }
        }
        out
    };
    let cell = |x0: &[f64], xi: &[f64], base: usize| -> Vec<f64> {
        let trunk = lin(xi, &p[base], &p[base + 1]);
        let t = lin(x0, &p[base + 2], &p[base + 3]);
        let a = lin(x0, &p[base + 4], &p[base + 5]);
        trunk
            .iter()
            .zip(t.iter().zip(&a))
            .map(|(tr, (tv, av))| tr + tv.tanh() * av)
            .collect()
    };
    let z1 = cell(&x, &x, 0);
    let z2 = cell(&x, &z1, 8);
    let expect = lin(&z2, &p[16], &p[17]);
    for (g, e) in got.iter().zip(&expect) {
        assert!((g - e).abs() < 1e-8, "{g} vs {e}");
    }
}

#[test]
fn kgate_zero_input_with_zero_biases_collapses_like_zero_gates() {
    // x0 = 0 feeds every gate transform zero, so with zero biases the
    // cells reduce to 0.5 * W_i x_i, and x_1 = x0 = 0 zeroes the whole
    // stack, leaving only the output bias.
    let mut spec = small_spec(ModelKind::Kgate, 3, 2);
    spec.normalize = false;
    spec.seed = 14;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 4, 20);
    model.train(&session).unwrap();
    {
        let p = model.params_mut();
        for idx in [1, 3, 5, 7, 9, 11, 13, 15] {
            for v in p[idx].data_mut() {
                *v = 0.0;
            }
        }
        p[17].data_mut().copy_from_slice(&[0.25, -0.75]);
    }
    let got = model.predict(&[0.0, 0.0, 0.0]).unwrap();
    assert_eq!(got, vec![0.25, -0.75]);
}

#[test]
fn scnn_concatenates_five_16_filter_branches() {
    let spec = small_spec(ModelKind::Scnn, 30, 30);
    let model = NetForecaster::new(spec).unwrap();
    // Dense layer sits on 5 × 16 = 80 pooled features.
    let dense = &model.params()[10];
    assert_eq!(dense.shape(), &[80, 30]);
}

#[test]
fn scnn_branch_length_is_valid_padding_arithmetic() {
    // Input 30, kernel 13 -> 18 positions before pooling.
    let mut g = Graph::new();
    let x = g.leaf(Tensor::matrix(1, 30, vec![1.0; 30]));
    let w = g.leaf(Tensor::from_vec(vec![16, 1, 13], vec![0.0; 16 * 13]));
    let b = g.leaf(Tensor::vector(vec![0.0; 16]));
    let h = g.conv1d(x, w, b);
    assert_eq!(g.value(h).shape(), &[16, 18]);
}

#[test]
fn cnn_with_zero_filters_outputs_dense_bias() {
    for kind in [ModelKind::CnnSeq, ModelKind::Scnn] {
        let mut spec = small_spec(kind, 30, 4);
        spec.normalize = false;
        let mut model = NetForecaster::new(spec).unwrap();
        let session = random_session(model.spec(), 3, 8);
        model.train(&session).unwrap();
        zero_params(&mut model);
        let last = model.params().len() - 1;
        model.params_mut()[last]
            .data_mut()
            .copy_from_slice(&[3.0, -1.0, 0.5, 2.0]);
        let got = model.predict(&session.observations[0].input).unwrap();
        assert_eq!(got, vec![3.0, -1.0, 0.5, 2.0], "{kind}");
    }
}

#[test]
fn cnn_input_shorter_than_kernel_is_a_shape_error() {
    let spec = small_spec(ModelKind::Scnn, 12, 4);
    assert!(matches!(
        build_forecaster(&spec),
        Err(ModelError::BadConfig(_))
    ));
    let spec = small_spec(ModelKind::CnnSeq, 6, 4);
    assert!(build_forecaster(&spec).is_err());
}

#[test]
fn zero_weight_recurrent_nets_output_readout_bias() {
    for kind in [ModelKind::LstmVec, ModelKind::GruVec] {
        let mut spec = small_spec(kind, 6, 3);
        spec.normalize = false;
        let mut model = NetForecaster::new(spec).unwrap();
        let session = random_session(model.spec(), 3, 11);
        model.train(&session).unwrap();
        zero_params(&mut model);
        let last = model.params().len() - 1;
        model.params_mut()[last]
            .data_mut()
            .copy_from_slice(&[0.5, 1.5, -0.5]);
        let got = model.predict(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(got, vec![0.5, 1.5, -0.5], "{kind}");
    }
}

#[test]
fn lstm_forced_gates_freeze_the_cell_state() {
    // Forget bias >> 0 and input bias << 0: c stays at its initial
    // zero, h stays 0, so the output ignores the input sequence.
    let mut spec = small_spec(ModelKind::LstmVec, 5, 2);
    spec.normalize = false;
    spec.seed = 21;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 3, 12);
    model.train(&session).unwrap();
    let hidden = model.spec().sizing().hidden2;
    {
        let p = model.params_mut();
        let b = p[2].data_mut();
        for k in 0..hidden {
            b[k] = -50.0; // input gate shut
            b[hidden + k] = 50.0; // forget gate open
        }
    }
    let a = model.predict(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let b = model.predict(&[9.0, -3.0, 7.0, 0.5, 2.0]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, model.params()[4].data().to_vec());
}

/// Sequence-to-value prediction equals 30 manual applications of the
/// one-step cell, computed here with plain loops (no graph).
#[test]
fn lstm_val_equals_explicit_loop_unrolling() {
    let mut spec = ForecasterSpec::new(ModelKind::LstmVal).with_lengths(8, 5);
    spec.training.epochs = 3;
    spec.seed = 33;
    let mut model = NetForecaster::new(spec).unwrap();
    let session = random_session(model.spec(), 6, 13);
    model.train(&session).unwrap();
    let window = session.observations[0].input.clone();
    let got = model.predict(&window).unwrap();

    // Manual oracle.
    let p = model.params();
    let hid = model.spec().sizing().hidden2;
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let step = |x: f64, h: &mut Vec<f64>, c: &mut Vec<f64>| {
        let pre: Vec<f64> = (0..4 * hid)
            .map(|j| {
                let mut acc = x * p[0].at(0, j) + p[2].data()[j];
                for k in 0..hid {
                    acc += h[k] * p[1].at(k, j);
                }
                acc
            })
            .collect();
        for k in 0..hid {
            let i = sigmoid(pre[k]);
            let f = sigmoid(pre[hid + k]);
            let gg = pre[2 * hid + k].tanh();
            let o = sigmoid(pre[3 * hid + k]);
            c[k] = f * c[k] + i * gg;
            h[k] = o * c[k].tanh();
        }
    };
    let one_step = |win: &[f64]| -> f64 {
        let nw = crate::windowing::normalize_window(win);
        let mut h = vec![0.0; hid];
        let mut c = vec![0.0; hid];
        for &x in &nw.values {
            step(x, &mut h, &mut c);
        }
        let mut out = p[4].data()[0];
        for k in 0..hid {
            out += h[k] * p[3].at(k, 0);
        }
        crate::windowing::denormalize(&[out], nw.lo, nw.hi)[0]
    };
    let mut rolling = window;
    let mut expect = Vec::new();
    for _ in 0..5 {
        let next = one_step(&rolling);
        expect.push(next);
        rolling.remove(0);
        rolling.push(next);
    }
    for (g, e) in got.iter().zip(&expect) {
        assert!((g - e).abs() < 1e-9, "{g} vs {e}");
    }
}

#[test]
fn sliding_window_seq2val_variant_trains_on_one_step_pairs() {
    let mut spec = ForecasterSpec::new(ModelKind::GruVal).with_lengths(8, 5);
    spec.training.epochs = 4;
    spec.seq2val_training = Seq2ValTraining::SlidingWindows;
    spec.seed = 41;
    let mut model = build_forecaster(&spec).unwrap();
    let session = random_session(&spec, 6, 25);
    model.train(&session).unwrap();
    let out = model.predict(&session.observations[0].input).unwrap();
    assert_eq!(out.len(), 5);
    assert!(out.iter().all(|v| v.is_finite()));

    // The two seq2value readings train on different data, so the same
    // seed must yield different parameters.
    let mut full = spec.clone();
    full.seq2val_training = Seq2ValTraining::FullSession;
    let mut other = build_forecaster(&full).unwrap();
    other.train(&session).unwrap();
    assert_ne!(
        model.predict(&session.observations[0].input).unwrap(),
        other.predict(&session.observations[0].input).unwrap()
    );

    // Too few days for even one window: an empty-session error.
    let mut starved = spec.clone();
    starved.input_len = 40;
    let mut model = build_forecaster(&starved).unwrap();
    let short = TrainSession::new(session.observations.clone(), vec![1.0; 10]);
    assert!(matches!(model.train(&short), Err(ModelError::EmptySession)));
}

#[test]
fn vec_and_val_outputs_have_forecast_length() {
    for kind in [
        ModelKind::LstmVec,
        ModelKind::LstmVal,
        ModelKind::GruVec,
        ModelKind::GruVal,
    ] {
        let mut spec = ForecasterSpec::new(kind).with_lengths(6, 4);
        spec.training.epochs = 2;
        let mut model = build_forecaster(&spec).unwrap();
        let session = random_session(&spec, 4, 14);
        model.train(&session).unwrap();
        let out = model.predict(&session.observations[0].input).unwrap();
        assert_eq!(out.len(), 4, "{kind}");
        assert!(out.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn every_kind_survives_zero_epoch_training() {
    for kind in ModelKind::ALL {
        let mut spec = ForecasterSpec::new(kind).with_lengths(30, 30);
        spec.training.epochs = 0;
        let mut model = build_forecaster(&spec).unwrap();
        let session = random_session(&spec, 5, 15);
        model.train(&session).unwrap();
        assert!(model.is_trained());
        let out = model.predict(&session.observations[0].input).unwrap();
        assert_eq!(out.len(), 30, "{kind}");
        assert!(out.iter().all(|v| v.is_finite()), "{kind}");
    }
}

#[test]
fn every_kind_maps_valid_windows_to_finite_forecasts_after_training() {
    for kind in ModelKind::ALL {
        let mut spec = ForecasterSpec::new(kind).with_lengths(30, 30);
        spec.training.epochs = 3;
        spec.seed = 23;
        let mut model = build_forecaster(&spec).unwrap();
        let session = random_session(&spec, 6, 24);
        model.train(&session).unwrap();
        for probe in [
            session.observations[3].input.clone(),
            vec![1e4; 30],
            (0..30).map(|i| 1.0 + i as f64).collect(),
        ] {
            let out = model.predict(&probe).unwrap();
            assert_eq!(out.len(), 30, "{kind}");
            assert!(out.iter().all(|v| v.is_finite()), "{kind} on {probe:?}");
        }
    }
}

#[test]
fn exploding_learning_rate_reports_divergence_with_epoch() {
    let mut spec = ForecasterSpec::new(ModelKind::MlpRelu).with_lengths(6, 4);
    spec.training.epochs = 50;
    spec.training.lr = 1e155;
    let mut model = build_forecaster(&spec).unwrap();
    let session = random_session(&spec, 6, 21);
    match model.train(&session) {
        Err(ModelError::Diverged { epoch }) => assert!(epoch < 50),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn minibatches_smaller_than_the_session_still_train_deterministically() {
    let mut spec = ForecasterSpec::new(ModelKind::MlpTanh).with_lengths(6, 4);
    spec.training.epochs = 9;
    spec.training.batch_size = 2; // 8 observations -> 4 chunks per epoch
    spec.seed = 31;
    let session = random_session(&spec, 8, 22);
    let mut a = build_forecaster(&spec).unwrap();
    a.train(&session).unwrap();
    let mut b = build_forecaster(&spec).unwrap();
    b.train(&session).unwrap();
    let w = &session.observations[0].input;
    assert_eq!(a.predict(w).unwrap(), b.predict(w).unwrap());
}

#[test]
fn predict_refuses_until_trained() {
    for kind in [ModelKind::MlpTanh, ModelKind::LstmVec, ModelKind::Gmdh] {
        let spec = ForecasterSpec::new(kind).with_lengths(6, 3);
        let model = build_forecaster(&spec).unwrap();
        assert!(
            matches!(model.predict(&[1.0; 6]), Err(ModelError::NotTrained)),
            "{kind}"
        );
    }
}

#[test]
fn training_is_deterministic_and_reset_restores_it() {
    for kind in [
        ModelKind::MlpTanh,
        ModelKind::Rbf,
        ModelKind::GruVec,
        ModelKind::Gmdh,
    ] {
        let mut spec = ForecasterSpec::new(kind).with_lengths(6, 4);
        spec.training.epochs = 12;
        spec.seed = 77;
        let session = random_session(&spec, 8, 16);
        let window = session.observations[2].input.clone();

        let mut a = build_forecaster(&spec).unwrap();
        a.train(&session).unwrap();
        let pa = a.predict(&window).unwrap();

        let mut b = build_forecaster(&spec).unwrap();
        b.train(&session).unwrap();
        assert_eq!(
            pa,
            b.predict(&window).unwrap(),
            "{kind}: fresh build differs"
        );

        // Retrain after reset with the same seed: bit-identical again,
        // parameters included.
        a.reset(77);
        a.train(&session).unwrap();
        assert_eq!(pa, a.predict(&window).unwrap(), "{kind}: reset differs");
        assert_eq!(
            serde_json::to_string(&a.to_blob()).unwrap(),
            serde_json::to_string(&b.to_blob()).unwrap(),
            "{kind}: trained state differs"
        );
    }
}

#[test]
fn degenerate_constant_window_is_constant_safe() {
    let mut spec = ForecasterSpec::new(ModelKind::MlpTanh).with_lengths(6, 4);
    spec.training.epochs = 5;
    let mut model = build_forecaster(&spec).unwrap();
    let session = random_session(&spec, 5, 17);
    model.train(&session).unwrap();
    let out = model.predict(&[7.0; 6]).unwrap();
    assert_eq!(out, vec![7.0; 4]);
}

#[test]
fn mlp_linear_converges_to_the_ar_solution() {
    // Labels are an exact linear map of the inputs; AR solves it in
    // closed form and the linear net must reach the same loss basin.
    let mut rng = ChaCha20Rng::seed_from_u64(55);
    let (input_len, out_len) = (4, 2);
    let w_true: Vec<f64> = (0..input_len * out_len)
        .map(|_| rng.gen_range(-0.5..0.5))
        .collect();
    let observations: Vec<Observation> = (0..24)
        .map(|r| {
            let input: Vec<f64> = (0..input_len).map(|_| rng.gen_range(0.0..1.0)).collect();
            let label: Vec<f64> = (0..out_len)
                .map(|j| {
                    (0..input_len)
                        .map(|i| input[i] * w_true[i * out_len + j])
                        .sum::<f64>()
                        + 0.1
                })
                .collect();
            Observation {
                input,
                label,
                start_index: r,
            }
        })
        .collect();
    let session = TrainSession::from_observations(observations);

    let mut ar_spec = ForecasterSpec::new(ModelKind::Ar).with_lengths(input_len, out_len);
    ar_spec.normalize = false;
    let mut ar = build_forecaster(&ar_spec).unwrap();
    ar.train(&session).unwrap();

    let mut net_spec = ForecasterSpec::new(ModelKind::MlpLinear).with_lengths(input_len, out_len);
    net_spec.training.epochs = 6000;
    net_spec.training.lr = 0.002;
    net_spec.seed = 3;
    let mut net = build_forecaster(&net_spec).unwrap();
    net.train(&session).unwrap();

    let mse_of = |m: &dyn Forecaster| -> f64 {
        let mut acc = 0.0;
        let mut count = 0;
        for obs in &session.observations {
            let pred = m.predict(&obs.input).unwrap();
            for (p, l) in pred.iter().zip(&obs.label) {
                acc += (p - l) * (p - l);
                count += 1;
            }
        }
        acc / count as f64
    };
    let ar_mse = mse_of(ar.as_ref());
    let net_mse = mse_of(net.as_ref());
    assert!(ar_mse < 1e-16, "AR in-sample MSE {ar_mse}");
    assert!(net_mse < 1e-6, "net in-sample MSE {net_mse}");
    assert!((net_mse - ar_mse).abs() < 1e-4);
}

#[test]
fn normalized_models_are_affine_equivariant() {
    // Scaling by a power of two and shifting by zero keeps the strict
    // normalization bit-identical, so predictions map exactly.
    let mut spec = ForecasterSpec::new(ModelKind::MlpTanh).with_lengths(6, 4);
    spec.training.epochs = 25;
    spec.seed = 19;
    let session = random_session(&spec, 8, 18);
    let window = session.observations[1].input.clone();

    let mut base = build_forecaster(&spec).unwrap();
    base.train(&session).unwrap();
    let p_base = base.predict(&window).unwrap();

    let scale = |v: &[f64], c: f64, d: f64| -> Vec<f64> { v.iter().map(|x| c * x + d).collect() };
    let scaled_session = TrainSession::new(
        session
            .observations
            .iter()
            .map(|o| Observation {
                input: scale(&o.input, 2.0, 0.0),
                label: scale(&o.label, 2.0, 0.0),
                start_index: o.start_index,
            })
            .collect(),
        scale(&session.days, 2.0, 0.0),
    );
    let mut scaled = build_forecaster(&spec).unwrap();
    scaled.train(&scaled_session).unwrap();
    let p_scaled = scaled.predict(&scale(&window, 2.0, 0.0)).unwrap();
    for (a, b) in p_base.iter().zip(&p_scaled) {
        assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} {b}");
    }

    // General affine map: equal up to float-rounding drift through
    // training, well inside 1e-6 relative.
    let (c, d) = (3.7, 220.0);
    let gen_session = TrainSession::new(
        session
            .observations
            .iter()
            .map(|o| Observation {
                input: scale(&o.input, c, d),
                label: scale(&o.label, c, d),
                start_index: o.start_index,
            })
            .collect(),
        scale(&session.days, c, d),
    );
    let mut gen = build_forecaster(&spec).unwrap();
    gen.train(&gen_session).unwrap();
    let p_gen = gen.predict(&scale(&window, c, d)).unwrap();
    for (a, b) in p_gen.iter().zip(&p_base) {
        let expect = c * b + d;
        assert!(
            (a - expect).abs() <= 1e-6 * expect.abs().max(1.0),
            "{a} vs {expect}"
        );
    }
}

#[test]
fn model_blobs_restore_predictions() {
    for kind in [ModelKind::MlpRelu, ModelKind::LstmVal, ModelKind::Scnn, ModelKind::Gmdh] {
        let mut spec = ForecasterSpec::new(kind).with_lengths(30, 6);
        spec.training.epochs = 2;
        let mut model = build_forecaster(&spec).unwrap();
        let session = random_session(&spec, 4, 19);
        model.train(&session).unwrap();
        let blob = model.to_blob();
        let text = serde_json::to_string(&blob).unwrap();
        let back: ModelBlob = serde_json::from_str(&text).unwrap();
        let restored = load_forecaster(&back).unwrap();
        let w = &session.observations[0].input;
        assert_eq!(
            model.predict(w).unwrap(),
            restored.predict(w).unwrap(),
            "{kind}"
        );
    }
}

/// Quick finite-difference sanity on one kind; the acceptance suite
/// runs the full sweep over every architecture.
#[test]
fn full_model_gradients_match_finite_differences() {
    let mut spec = ForecasterSpec::new(ModelKind::Kgate).with_lengths(4, 3);
    spec.seed = 61;
    let model = NetForecaster::new(spec).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(62);
    let x = Tensor::matrix(3, 4, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let y = Tensor::matrix(3, 3, (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect());

    let loss_of = |m: &NetForecaster| -> f64 {
        let mut g = Graph::new();
        let pids: Vec<NodeId> = m.params().iter().map(|t| g.leaf(t.clone())).collect();
        let xid = g.leaf(x.clone());
        let yid = g.leaf(y.clone());
        let pred = m.forward(&mut g, &pids, xid);
        let loss = g.mse(pred, yid);
        g.value(loss).item()
    };

    // Analytic gradients.
    let mut g = Graph::new();
    let pids: Vec<NodeId> = model.params().iter().map(|t| g.leaf(t.clone())).collect();
    let xid = g.leaf(x.clone());
    let yid = g.leaf(y.clone());
    let pred = model.forward(&mut g, &pids, xid);
    let loss = g.mse(pred, yid);
    let grads = g.backward(loss);

    let h = 1e-5;
    for (pi, pid) in pids.iter().enumerate() {
        let n = model.params()[pi].len();
        for k in (0..n).step_by((n / 3).max(1)) {
            let analytic = grads.get(*pid).data()[k];
            let mut probe = model.clone();
            probe.params_mut()[pi].data_mut()[k] += h;
            let up = loss_of(&probe);
            probe.params_mut()[pi].data_mut()[k] -= 2.0 * h;
            let down = loss_of(&probe);
            let fd = (up - down) / (2.0 * h);
            let tol = 1e-6 + 1e-4 * fd.abs().max(analytic.abs());
            assert!(
                (fd - analytic).abs() <= tol,
                "param {pi}[{k}]: {fd} vs {analytic}"
            );
        }
    }
}
