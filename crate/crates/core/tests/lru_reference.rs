//! The LRU map against a brute-force timestamped reference.

use iclparse_core::cache::LruMap;
use proptest::prelude::*;

#[derive(Default)]
struct Reference {
    cap: usize,
    clock: u64,
    // (key, value, last use)
    entries: Vec<(u8, u32, u64)>,
}

impl Reference {
    fn get(&mut self, k: u8) -> Option<u32> {
        self.clock += 1;
        let clock = self.clock;
        self.entries.iter_mut().find(|e| e.0 == k).map(|e| {
            e.2 = clock;
            e.1
        })
    }

    fn put(&mut self, k: u8, v: u32) -> Option<(u8, u32)> {
        self.clock += 1;
        if let Some(e) = self.entries.iter_mut().find(|e| e.0 == k) {
            e.1 = v;
            e.2 = self.clock;
            return None;
        }
        let mut evicted = None;
        if self.entries.len() == self.cap {
            let oldest = (0..self.entries.len()).min_by_key(|&i| self.entries[i].2).unwrap();
            let e = self.entries.remove(oldest);
            evicted = Some((e.0, e.1));
        }
        self.entries.push((k, v, self.clock));
        evicted
    }

    fn order(&self) -> Vec<u8> {
        let mut e = self.entries.clone();
        e.sort_by_key(|e| e.2);
        e.into_iter().map(|e| e.0).collect()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Get(u8),
    Put(u8, u32),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0u8..24).prop_map(Op::Get),
        (0u8..24, any::<u32>()).prop_map(|(k, v)| Op::Put(k, v))
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_reference(cap in 1usize..12, ops in prop::collection::vec(op(), 1000..1500)) {
        let mut lru = LruMap::new(cap);
        let mut reference = Reference { cap, ..Reference::default() };
        for op in ops {
            match op {
                Op::Get(k) => prop_assert_eq!(lru.get(&k).copied(), reference.get(k)),
                Op::Put(k, v) => prop_assert_eq!(lru.put(k, v), reference.put(k, v)),
            }
            prop_assert!(lru.len() <= cap);
            prop_assert_eq!(lru.len(), reference.entries.len());
        }
        let keys: Vec<u8> = lru.iter().map(|(k, _)| *k).collect();
        prop_assert_eq!(keys, reference.order());
    }
}
