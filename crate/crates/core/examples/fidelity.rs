//! Trains every effect on a folder of photos and reports held-out fidelity.
//!
//! cargo run --release -p styler-core --example fidelity -- TRAIN_DIR HELDOUT_DIR [effect]

use std::path::Path;
use std::time::Instant;

use styler::effects::{reference_target, train_effect, Effect, EffectParams, TrainOptions};
use styler::{blade, io, metrics, Image64};

fn load_dir(dir: &Path) -> Vec<Image64> {
    let mut paths: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths.iter().filter(|p| p.extension().is_some_and(|e| e == "png")).map(|p| io::load_luma(p).unwrap()).collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let train = load_dir(Path::new(&args[1]));
    let held = load_dir(Path::new(&args[2]));
    let only: Option<Effect> = args.get(3).filter(|s| *s != "all").map(|s| s.parse().unwrap());
    let mut params = EffectParams::default();
    let mut lambda = None;
    for kv in args.iter().skip(4) {
        let (k, v) = kv.split_once('=').unwrap();
        let v: f64 = v.parse().unwrap();
        match k {
            "rho" => params.rho = v,
            "length" => params.length = v,
            "sigma" => params.sigma = v,
            "p" => params.p = v,
            "lic" => params.lic_length = v,
            "delta" => params.delta = v,
            "steps" => params.steps = v as u32,
            "lambda" => lambda = Some(v),
            _ => panic!("{k}"),
        }
    }
    for effect in Effect::ALL.into_iter().filter(|e| only.is_none_or(|o| o == *e)) {
        let t0 = Instant::now();
        let (model, rep) = train_effect(effect, &train, &params, &{
            let mut o = TrainOptions::for_effect(effect);
            if let Some(l) = lambda {
                o.lambda = l;
            }
            o
        })
        .unwrap();
        let t1 = t0.elapsed().as_secs_f64();
        let (mut ps, mut ss) = (Vec::new(), Vec::new());
        for img in &held {
            let target = reference_target(effect, img, &params).unwrap();
            let out = blade::infer(img, &model).unwrap();
            ps.push(metrics::psnr(&out, &target).unwrap());
            ss.push(metrics::mssim(&out, &target).unwrap());
        }
        println!(
            "{effect}: train {t1:.1}s fallback {} psnr {:?} mssim {:?} total {:.1}s",
            rep.fallback_buckets.len(),
            ps.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            ss.iter().map(|v| (v * 10000.0).round() / 10000.0).collect::<Vec<_>>(),
            t0.elapsed().as_secs_f64()
        );
    }
}
