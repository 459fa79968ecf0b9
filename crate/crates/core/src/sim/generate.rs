use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Open01, StandardNormal};

use super::config::{Scenario, SimConfig, FOLLOW_UP};
use crate::error::Result;
use crate::survival::{DataBlock, SubjectRecord};

/// Independent counter-based stream for one (replicate, block) pair.
pub fn block_rng(seed: u64, replicate: usize, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((replicate as u64) << 32) | k as u64);
    rng
}

/// Draws block `k` of a stream from `rng`.
///
/// Covariate j follows N(0,1), Bernoulli(0.5), Bernoulli(0.1) for
/// j mod 3 = 0, 1, 2. Every subject consumes the same sequence of draws
/// regardless of scenario, so alternatives with a zero effect reproduce the
/// null stream bit for bit.
pub fn generate_block<R: Rng + ?Sized>(cfg: &SimConfig, k: usize, rng: &mut R) -> Result<DataBlock> {
    let p = cfg.p();
    let altered = !cfg.scenario.is_null() && k >= cfg.change_block;
    let mut beta = cfg.beta.clone();
    let mut sigma = 0.0;
    if altered {
        match cfg.scenario {
            Scenario::Frailty { sigma: s } => sigma = s,
            Scenario::BetaShift { delta } => beta[0] += delta,
            Scenario::Null => {}
        }
    }
    let half = Bernoulli::new(0.5).expect("valid probability");
    let tenth = Bernoulli::new(0.1).expect("valid probability");

    let mut records = Vec::with_capacity(cfg.block_size);
    for _ in 0..cfg.block_size {
        let mut x = Vec::with_capacity(p);
        for j in 0..p {
            x.push(match j % 3 {
                0 => rng.sample::<f64, _>(StandardNormal),
                1 => half.sample(rng) as u8 as f64,
                _ => tenth.sample(rng) as u8 as f64,
            });
        }
        let frailty: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.sample(Open01);
        let mix: f64 = rng.random();
        let c: f64 = rng.sample(Open01);

        let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + sigma * frailty;
        let event_time = -u.ln() / (cfg.lambda0 * eta.exp());
        let censor_time = if mix < cfg.epsilon { FOLLOW_UP } else { FOLLOW_UP * c };
        let status = event_time < censor_time;
        records.push(SubjectRecord::new(event_time.min(censor_time), status, x));
    }
    DataBlock::new(k, records)
}

/// Block `k` (1-based) of replicate `replicate`, reproducible from the seed.
pub fn stream_block(cfg: &SimConfig, replicate: usize, k: usize) -> Result<DataBlock> {
    generate_block(cfg, k, &mut block_rng(cfg.seed, replicate, k))
}
