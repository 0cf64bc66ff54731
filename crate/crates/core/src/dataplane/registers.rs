/// Fixed-size register array indexed by flow digest. A slot holds one flow's
/// state; a colliding flow overwrites it, so the evicted flow's state is lost.
#[derive(Clone, Debug)]
pub struct RegisterArray<V> {
    slots: Vec<Option<(u64, V)>>,
    evictions: u64,
}

pub const DEFAULT_REGISTER_SLOTS: usize = 4096;

impl<V: Clone> RegisterArray<V> {
    pub fn new(slots: usize) -> RegisterArray<V> {
        RegisterArray {
            slots: vec![None; slots.max(1)],
            evictions: 0,
        }
    }

    fn index(&self, key: u64) -> usize {
        (crate::simcore::mix64(key) % self.slots.len() as u64) as usize
    }

    pub fn get(&self, key: u64) -> Option<&V> {
        match &self.slots[self.index(key)] {
            Some((k, v)) if *k == key => Some(v),
            _ => None,
        }
    }

    pub fn get_mut(&mut self, key: u64) -> Option<&mut V> {
        let i = self.index(key);
        match &mut self.slots[i] {
            Some((k, v)) if *k == key => Some(v),
            _ => None,
        }
    }

    /// Returns the slot for `key`, initializing (and evicting any other flow) if needed.
    pub fn entry(&mut self, key: u64, init: impl FnOnce() -> V) -> &mut V {
        let i = self.index(key);
        let hit = matches!(&self.slots[i], Some((k, _)) if *k == key);
        if !hit {
            if self.slots[i].is_some() {
                self.evictions += 1;
            }
            self.slots[i] = Some((key, init()));
        }
        &mut self.slots[i].as_mut().expect("slot just filled").1
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }
}
