use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every simulated run.
pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` at step-size index `eta_index`, independent of worker
/// count and scheduling.
pub fn run_seed(master: u64, eta_index: usize, run: usize) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ (eta_index as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ (run as u64).wrapping_mul(0xA076_1D64_78BD_642F))
}

pub fn rng_for(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
