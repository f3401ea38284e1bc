//! Warp-level memory-system rules: global coalescing and shared-memory banks.

/// Widest warp the memory rules accept.
pub const MAX_LANES: usize = 64;

/// Outcome of coalescing one warp's global access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Coalesced {
    pub active_lanes: u64,
    pub transactions: u64,
    /// Distinct bytes the lanes asked for.
    pub bytes_requested: u64,
    pub bytes_transferred: u64,
}

impl Coalesced {
    pub fn efficiency(&self) -> Option<f64> {
        (self.bytes_transferred > 0)
            .then(|| self.bytes_requested as f64 / self.bytes_transferred as f64)
    }
}

/// Coalesces per-lane byte addresses into aligned `transaction_bytes` segments.
///
/// `None` lanes are predicated off. Lanes hitting the same element are served
/// by one request.
pub fn coalesce_warp_access(
    addresses: &[Option<u64>],
    element_bytes: usize,
    transaction_bytes: usize,
) -> Coalesced {
    assert!(addresses.len() <= MAX_LANES, "warp wider than {MAX_LANES} lanes");
    let tx = transaction_bytes as u64;
    let eb = element_bytes as u64;
    let mut segments = [0u64; 2 * MAX_LANES];
    let mut elements = [0u64; MAX_LANES];
    let (mut nseg, mut nelem) = (0usize, 0usize);
    for addr in addresses.iter().flatten() {
        elements[nelem] = *addr;
        nelem += 1;
        for seg in addr / tx..=(addr + eb - 1) / tx {
            segments[nseg] = seg;
            nseg += 1;
        }
    }
    let active = nelem as u64;
    let distinct = |buf: &mut [u64]| {
        buf.sort_unstable();
        let mut count = 0;
        for i in 0..buf.len() {
            if i == 0 || buf[i] != buf[i - 1] {
                count += 1;
            }
        }
        count as u64
    };
    let transactions = distinct(&mut segments[..nseg]);
    let unique = distinct(&mut elements[..nelem]);
    Coalesced {
        active_lanes: active,
        transactions,
        bytes_requested: unique * eb,
        bytes_transferred: transactions * tx,
    }
}

/// Serialized passes needed to serve one shared-memory request phase.
///
/// Each entry is a 4-byte word address; the bank is `word % num_banks`.
/// A bank serves one distinct word per pass and broadcasts a word to every
/// lane asking for it. Returns 0 when no lane is active.
pub fn shared_access_conflicts(words: &[Option<u64>], num_banks: usize) -> u64 {
    assert!(words.len() <= 2 * MAX_LANES);
    let mut buf = [0u64; 2 * MAX_LANES];
    let mut n = 0;
    for w in words.iter().flatten() {
        buf[n] = *w;
        n += 1;
    }
    let buf = &mut buf[..n];
    buf.sort_unstable();
    let mut per_bank = vec![0u64; num_banks];
    for i in 0..buf.len() {
        if i == 0 || buf[i] != buf[i - 1] {
            per_bank[(buf[i] % num_banks as u64) as usize] += 1;
        }
    }
    per_bank.into_iter().max().unwrap_or(0)
}

/// Shared-memory word addresses touched by element `elem` of `element_bytes` width.
#[inline]
pub fn element_words(elem: u64, element_bytes: usize) -> impl Iterator<Item = u64> {
    let per = (element_bytes / 4).max(1) as u64;
    (0..per).map(move |w| elem * per + w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lanes(f: impl Fn(u64) -> u64) -> Vec<Option<u64>> {
        (0..32).map(|l| Some(f(l))).collect()
    }

    #[test]
    fn consecutive_doubles_fully_coalesce() {
        let c = coalesce_warp_access(&lanes(|l| 1024 + 8 * l), 8, 128);
        assert_eq!(c.transactions, 2);
        assert_eq!(c.bytes_transferred, 256);
        assert_eq!(c.bytes_requested, 256);
        assert_eq!(c.efficiency(), Some(1.0));
    }

    #[test]
    fn broadcast_efficiency() {
        let c = coalesce_warp_access(&lanes(|_| 4096), 8, 128);
        assert_eq!(c.transactions, 1);
        assert_eq!(c.efficiency(), Some(0.0625));
        let c = coalesce_warp_access(&lanes(|_| 4096), 8, 32);
        assert_eq!(c.efficiency(), Some(0.25));
    }

    #[test]
    fn misaligned_run_needs_extra_segment() {
        let c = coalesce_warp_access(&lanes(|l| 64 + 8 * l), 8, 128);
        assert_eq!(c.transactions, 3);
    }

    #[test]
    fn inactive_lanes_ignored() {
        let mut a = lanes(|l| 4 * l);
        for x in a.iter_mut().skip(8) {
            *x = None;
        }
        let c = coalesce_warp_access(&a, 4, 128);
        assert_eq!(c.active_lanes, 8);
        assert_eq!(c.transactions, 1);
        assert_eq!(c.bytes_requested, 32);
        assert_eq!(coalesce_warp_access(&[None; 32], 4, 128), Coalesced::default());
    }

    #[test]
    fn bank_conflicts_64x2_tile() {
        // one column of a 64x2 f32 tile, column-major: element (i, 0) at i
        let col: Vec<_> = (0..32).map(Some).collect();
        assert_eq!(shared_access_conflicts(&col, 32), 1);
        // row-major: element (i, 0) at 2 * i
        let row: Vec<_> = (0..32).map(|i| Some(2 * i)).collect();
        assert_eq!(shared_access_conflicts(&row, 32), 2);
        assert_eq!(shared_access_conflicts(&[Some(17); 32], 32), 1);
        assert_eq!(shared_access_conflicts(&[None; 32], 32), 0);
    }

    #[test]
    fn row_major_tile_is_t2_way() {
        for t2 in [2u64, 4, 8] {
            let words: Vec<_> = (0..32).map(|i| Some(i * t2)).collect();
            assert_eq!(shared_access_conflicts(&words, 32), t2);
        }
    }

    #[test]
    fn double_words() {
        assert_eq!(element_words(3, 8).collect::<Vec<_>>(), vec![6, 7]);
        assert_eq!(element_words(3, 4).collect::<Vec<_>>(), vec![3]);
    }
}
