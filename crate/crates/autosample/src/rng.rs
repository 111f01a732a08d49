//! Deterministic random streams.
//!
//! Every run draws all randomness from a single master seed. Subsystems get
//! their own labelled streams so that, e.g., adding a sampler to the search
//! space does not shift the draws seen by the other samplers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A master seed plus a scope path ("search", "retrain", ...).
#[derive(Debug, Clone)]
pub struct Seeds {
    master: u64,
    scope: String,
}

impl Seeds {
    pub fn new(master: u64) -> Self {
        Seeds {
            master,
            scope: String::new(),
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// A child scope: `Seeds::new(s).scoped("search")` then `.rng("gumbel")`
    /// yields the stream "search.gumbel".
    pub fn scoped(&self, name: &str) -> Seeds {
        let scope = if self.scope.is_empty() {
            name.to_string()
        } else {
            format!("{}.{}", self.scope, name)
        };
        Seeds {
            master: self.master,
            scope,
        }
    }

    /// The stream for `label` within this scope.
    pub fn rng(&self, label: &str) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(fnv1a(self.full_label(label).as_bytes()));
        rng
    }

    /// A derived 64-bit seed, for APIs that take a seed rather than an rng.
    pub fn seed(&self, label: &str) -> u64 {
        self.master ^ fnv1a(self.full_label(label).as_bytes())
    }

    fn full_label(&self, label: &str) -> String {
        if self.scope.is_empty() {
            label.to_string()
        } else {
            format!("{}.{}", self.scope, label)
        }
    }
}

/// FNV-1a, used only to map stream labels to stream ids. Stable across
/// platforms and releases, unlike `std::hash`.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
