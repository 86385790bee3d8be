//! Heat-bath (single-site Gibbs) sampling on a frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Configuration, Guard, Tail, Window};
use crate::specification::{Prepared, SpecificationModel};

/// Single-site kernels for every site of a sweep region, prepared once.
pub struct HeatBath {
    frame: Window,
    /// Frame position of each updated site, in canonical order.
    sites: Vec<usize>,
    prepared: Vec<Box<dyn Prepared>>,
    /// For each updated site, the frame positions of its boundary sites.
    gather: Vec<Vec<usize>>,
}

impl HeatBath {
    pub fn new(model: &SpecificationModel, frame: &Window, region: &Window, tail: Tail, guard: &Guard) -> Result<Self> {
        if region.is_empty() || !region.is_subset(frame) {
            return Err(Error::Shape("sweep region must be a nonempty part of the frame".into()));
        }
        let mut sites = Vec::new();
        let mut prepared = Vec::new();
        let mut gather = Vec::new();
        for x in region.iter() {
            let p = model.prepare(&Window::singleton(x.clone()), frame, tail, guard)?;
            gather.push(p.outside().iter().map(|y| frame.position(y).unwrap()).collect());
            sites.push(frame.position(x).unwrap());
            prepared.push(p);
        }
        Ok(HeatBath {
            frame: frame.clone(),
            sites,
            prepared,
            gather,
        })
    }

    pub fn frame(&self) -> &Window {
        &self.frame
    }

    /// One sweep in canonical site order, updating `states` on the frame.
    pub fn sweep<R: Rng>(&self, states: &mut [usize], rng: &mut R) -> Result<()> {
        let mut outside = Vec::new();
        for ((&x, p), g) in self.sites.iter().zip(&self.prepared).zip(&self.gather) {
            outside.clear();
            outside.extend(g.iter().map(|&i| states[i]));
            let probs = p.kernel(&outside)?.table.probs();
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (s, q) in probs.iter().enumerate() {
                acc += q;
                if u < acc {
                    pick = s;
                    break;
                }
            }
            // never land on a null state through rounding
            while probs[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            states[x] = pick;
        }
        Ok(())
    }
}

/// One sweep over `region` starting from `config`, with a fresh generator
/// seeded by `seed`.
pub fn heat_bath_sweep(
    model: &SpecificationModel,
    config: &Configuration,
    region: &Window,
    tail: Tail,
    seed: u64,
    guard: &Guard,
) -> Result<Configuration> {
    let hb = HeatBath::new(model, config.window(), region, tail, guard)?;
    let mut states = config.states().to_vec();
    hb.sweep(&mut states, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Configuration::new(config.window().clone(), states)
}

/// Independent chains, chain `i` drawing from stream `i` of the seed.
/// Returns a snapshot after every `stride` sweeps.
pub fn run_chains(
    hb: &HeatBath,
    init: &Configuration,
    seed: u64,
    chains: usize,
    sweeps: usize,
    stride: usize,
) -> Result<Vec<Vec<Configuration>>> {
    if init.window() != hb.frame() {
        return Err(Error::Shape("initial configuration must live on the sampler frame".into()));
    }
    if stride == 0 {
        return Err(Error::Invalid("stride must be positive".into()));
    }
    (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut states = init.states().to_vec();
            let mut snaps = Vec::with_capacity(sweeps / stride);
            for t in 1..=sweeps {
                hb.sweep(&mut states, &mut rng)?;
                if t % stride == 0 {
                    snaps.push(Configuration::new(init.window().clone(), states.clone())?);
                }
            }
            Ok(snaps)
        })
        .collect()
}
