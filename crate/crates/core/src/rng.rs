//! Counter-based random streams.
//!
//! A draw is a pure function of `(seed, substream path, counter)`, so any
//! path/coordinate/resample can be generated independently of thread
//! scheduling and re-generated bit-identically. The generator is the
//! splitmix64 output function applied to a Weyl sequence, which passes the
//! usual statistical batteries and is plenty for Monte Carlo.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline(always)]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Immutable key identifying one random stream. Derive sub-keys with
/// [`StreamKey::substream`]; the tree of keys is collision-resistant enough
/// for path/coordinate/bootstrap indexing.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix(seed.wrapping_add(GOLDEN)))
    }

    /// Child key for substream `idx` (path index, coordinate, resample id).
    #[inline]
    pub fn substream(self, idx: u64) -> Self {
        StreamKey(mix(self.0 ^ mix(idx.wrapping_mul(GOLDEN).wrapping_add(0x6a09_e667_f3bc_c909))))
    }

    /// The `counter`-th u64 of this stream, as a pure function.
    #[inline(always)]
    pub fn at(self, counter: u64) -> u64 {
        mix(self.0.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in the open interval (0,1); never returns 0 or 1.
    #[inline(always)]
    pub fn uniform_at(self, counter: u64) -> f64 {
        ((self.at(counter) >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }
}

/// Sequential view over a stream, for call sites that just want draws.
#[derive(Clone, Debug)]
pub struct Stream {
    key: StreamKey,
    counter: u64,
}

impl Stream {
    pub fn new(key: StreamKey) -> Self {
        Stream { key, counter: 0 }
    }

    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        let v = self.key.at(self.counter);
        self.counter += 1;
        v
    }

    #[inline(always)]
    pub fn uniform(&mut self) -> f64 {
        let v = self.key.uniform_at(self.counter);
        self.counter += 1;
        v
    }

    /// Exp(1) draw.
    #[inline(always)]
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Standard normal via Box-Muller (used only by test helpers).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
