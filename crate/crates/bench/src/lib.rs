//! Fixtures shared by the criterion benches.

use tdia::channel::{ChannelInstance, NormalizedChannel};
use tdia::seed;

/// `K`-user channel with normalized cross delays uniform on `-r..=r`.
pub fn random_normalized(users: usize, r: i64, master: u64) -> NormalizedChannel {
    let mut rng = seed::rng_for(master, &[users as u64]);
    let cross = (0..users)
        .map(|i| {
            (0..users)
                .map(|j| if i == j { 0 } else { rand_delay(&mut rng, r) })
                .collect()
        })
        .collect();
    NormalizedChannel::uniform(cross).expect("valid cross delays")
}

pub fn random_channel(users: usize, delay_bins: usize, master: u64) -> ChannelInstance {
    let mut rng = seed::rng_for(master, &[users as u64, delay_bins as u64]);
    ChannelInstance::random(users, delay_bins, &mut rng).expect("valid sizes")
}

fn rand_delay(rng: &mut impl rand::Rng, r: i64) -> i64 {
    rng.random_range(-r..=r)
}
