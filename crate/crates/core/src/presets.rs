//! Reference channels used throughout tests, benches and the CLI docs.
//!
//! Users are zero-based here even though the comments quote one-based link
//! labels.

use crate::channel::{ChannelInstance, NormalizedChannel};

/// Three users, zero direct delays, cross delays
/// `l21=3, l31=1, l12=1, l32=4, l13=3, l23=0`.
pub fn staggered_three_user() -> ChannelInstance {
    let delays = vec![vec![0, 1, 3], vec![3, 0, 0], vec![1, 4, 0]];
    ChannelInstance::with_unit_gains(5, delays).expect("valid preset")
}

/// Normalized cross delays `l'21=0, l'31=1, l'12=2, l'32=0, l'13=1, l'23=-2`.
/// Its independence rate is exactly 3/2 and it admits two half-rate patterns.
pub fn half_rate_three_user() -> NormalizedChannel {
    NormalizedChannel::uniform(half_rate_cross()).expect("valid preset")
}

/// [`half_rate_three_user`] embedded as a raw channel with all direct delays
/// equal to 2.
pub fn half_rate_three_user_channel() -> ChannelInstance {
    let delays = half_rate_cross()
        .into_iter()
        .map(|row| row.into_iter().map(|d| d + 2).collect())
        .collect();
    ChannelInstance::with_unit_gains(5, delays).expect("valid preset")
}

fn half_rate_cross() -> Vec<Vec<i64>> {
    vec![vec![0, 2, 1], vec![0, 0, -2], vec![1, 0, 0]]
}

/// Three-user channel whose direct delays make the OFDM data and
/// interference subspaces orthogonal for block length 13:
/// `l11=0, l22=5, l33=9, l12=5, l13=4, l21=4, l23=6, l31=5, l32=4`.
pub fn aligned_ofdm_three_user() -> ChannelInstance {
    let delays = vec![vec![0, 5, 4], vec![4, 5, 6], vec![5, 4, 9]];
    ChannelInstance::with_unit_gains(10, delays).expect("valid preset")
}
