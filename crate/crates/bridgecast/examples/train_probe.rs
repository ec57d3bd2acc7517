use std::time::Instant;

use bridgecast::generative::{
    train_unconditional, GenerativeHead, SampleSource, SolverConfig, TrainConfig,
};
use bridgecast::nn::fieldnet::{FieldNet, FieldNetCfg};
use bridgecast::nn::ParamStore;
use bridgecast::rng::{randn, stream_rng};
use bridgecast::schedules::{DdpmKind, DdpmSchedule, GammaKind, InterpKind, InterpolantSchedule, VpSde};
use bridgecast::tensor::Tensor;

fn bimodal(n: usize, seed: u64) -> Tensor {
    let z = randn(&[n, 1], &mut stream_rng(seed, 0));
    let mut out = z.clone();
    for i in 0..n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        out.data_mut()[i] = sign + 0.15 * z.data()[i];
    }
    out
}

fn sorted_w1(a: &Tensor, b: &Tensor) -> f64 {
    let mut x: Vec<f64> = a.data().to_vec();
    let mut y: Vec<f64> = b.data().to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64
}

fn net(prefix: &str) -> FieldNet {
    FieldNet::new(
        prefix,
        FieldNetCfg { input_dim: 1, hidden: 32, blocks: 2, time_dim: 16, cond_dim: 0 },
    )
    .unwrap()
}

fn main() {
    let data = bimodal(8192, 5);
    let tc = TrainConfig { iters: 3000, batch: 512, lr: 1e-3, seed: 9 };
    let n = 8192usize;

    for label in ["ddpm", "sgm", "fm", "si"] {
        let t0 = Instant::now();
        let head = match label {
            "ddpm" => GenerativeHead::Ddpm {
                sched: DdpmSchedule::new(DdpmKind::Cosine, 100).unwrap(),
                net: net("head.net"),
            },
            "sgm" => GenerativeHead::Sgm { vp: VpSde::new(0.1, 20.0).unwrap(), net: net("head.net") },
            "fm" => GenerativeHead::Fm { sigma_min: 0.01, net: net("head.net") },
            _ => GenerativeHead::Si {
                sched: InterpolantSchedule::new(InterpKind::Linear, GammaKind::Sqrt),
                vanilla: true,
                velocity: net("head.velocity"),
                noise: net("head.noise"),
            },
        };
        let mut store = ParamStore::new();
        head.init_params(&mut store, &mut stream_rng(21, 0)).unwrap();
        train_unconditional(&head, &mut store, &data, &tc).unwrap();

        let (a, b) = if label == "ddpm" {
            // Ancestral chain length is the ladder size: double the ladder.
            let coarse = match &head {
                GenerativeHead::Ddpm { net, .. } => GenerativeHead::Ddpm {
                    sched: DdpmSchedule::new(DdpmKind::Cosine, 50).unwrap(),
                    net: net.clone(),
                },
                _ => unreachable!(),
            };
            let sc = SolverConfig { steps: 50, epsilon: 0.5, clip_delta: 1e-3, seed: 77 };
            (
                coarse.sample(&store, SampleSource::Noise(n), None, &sc).unwrap(),
                head.sample(&store, SampleSource::Noise(n), None, &sc).unwrap(),
            )
        } else {
            let c50 = SolverConfig { steps: 50, epsilon: 0.5, clip_delta: 1e-3, seed: 77 };
            let c100 = SolverConfig { steps: 100, ..c50 };
            (
                head.sample(&store, SampleSource::Noise(n), None, &c50).unwrap(),
                head.sample(&store, SampleSource::Noise(n), None, &c100).unwrap(),
            )
        };
        println!(
            "{label}: W(50 vs 100) = {:.4}  ({:.0}s)",
            sorted_w1(&a, &b),
            t0.elapsed().as_secs_f64()
        );
    }
}
