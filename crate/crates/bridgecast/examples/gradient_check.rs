//! Check reverse-mode gradients against central finite differences.
//!
//! Builds a small conditional field network, runs a scalar readout through
//! the tape, and probes a handful of coordinates in every parameter tensor.
//!
//!     cargo run --example gradient_check

use bridgecast::error::Result;
use bridgecast::nn::fieldnet::{FieldNet, FieldNetCfg};
use bridgecast::nn::ParamStore;
use bridgecast::rng::{randn, stream_rng};
use bridgecast::tape::Tape;

fn main() -> Result<()> {
    let cfg = FieldNetCfg {
        input_dim: 2,
        hidden: 16,
        blocks: 2,
        time_dim: 8,
        cond_dim: 3,
    };
    let net = FieldNet::new("demo", cfg)?;
    let mut store = ParamStore::new();
    let mut rng = stream_rng(42, 0);
    net.init_params(&mut store, &mut rng)?;

    let x = randn(&[6, 2], &mut rng);
    let cond = randn(&[6, 3], &mut rng);
    let s: Vec<f64> = (0..6).map(|i| 0.1 + 0.15 * i as f64).collect();
    let weights = randn(&[6, 2], &mut rng);

    // Scalar readout: sum of an elementwise-weighted network output, so
    // every output coordinate contributes to the gradient.
    let forward = |tape: &mut Tape, st: &ParamStore| -> Result<bridgecast::tape::Var> {
        let vc = tape.leaf(&cond)?;
        let out = net.forward_tape(tape, st, &x, &s, Some(vc))?;
        let w = tape.leaf(&weights)?;
        let prod = tape.mul(out, w)?;
        Ok(tape.sum(prod))
    };

    let mut tape = Tape::new();
    let root = forward(&mut tape, &store)?;
    tape.backward(root)?;
    let grads: Vec<(String, Vec<f64>)> = tape
        .param_grads()?
        .into_iter()
        .map(|(n, g)| (n.to_string(), g.to_vec()))
        .collect();

    const H: f64 = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for (name, grad) in &grads {
        for idx in [0, grad.len() / 2, grad.len() - 1] {
            let orig = store.get(name)?.data()[idx];
            store.get_mut(name)?.data_mut()[idx] = orig + H;
            let mut tp = Tape::new();
            let vp = forward(&mut tp, &store)?;
            let up = tp.value_scalar(vp)?;
            store.get_mut(name)?.data_mut()[idx] = orig - H;
            let mut tm = Tape::new();
            let vm = forward(&mut tm, &store)?;
            let dn = tm.value_scalar(vm)?;
            store.get_mut(name)?.data_mut()[idx] = orig;

            let fd = (up - dn) / (2.0 * H);
            let g = grad[idx];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
            checked += 1;
        }
    }

    println!(
        "checked {checked} coordinates across {} parameter tensors",
        grads.len()
    );
    println!("worst relative error vs central differences: {worst:.3e}");
    assert!(worst < 1e-6, "gradients disagree with finite differences");
    println!("gradients agree with finite differences");
    Ok(())
}
