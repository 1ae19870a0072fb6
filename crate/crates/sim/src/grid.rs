//! Uniform-grid lookup of information molecules near an enzyme.
//!
//! Only the enzyme cube matters for binding, so the grid spans exactly that
//! cube. Each molecule is registered in every cell its binding sphere
//! touches; with a cell edge of at least `2 r_B` that is at most eight cells,
//! and an enzyme only has to inspect its own cell. Occupancy is a bitmap so
//! the common case (no molecule nearby) costs one bit test.

// 64³ bits is 32 KiB, small enough to stay in L1 during the enzyme sweep.
const MAX_CELLS_PER_AXIS: usize = 64;

#[derive(Clone, Debug)]
pub struct BindingGrid {
    half_side: f64,
    n: usize,
    inv_cell: f64,
    reach: f64,
    occupied: Vec<u64>,
    touched: Vec<u32>,
    /// (cell, molecule) pairs, sorted by cell once populated.
    entries: Vec<(u32, u32)>,
    sorted: bool,
}

impl BindingGrid {
    /// Grid over the cube `[-half_side, half_side]³` for a binding radius `reach`.
    pub fn new(half_side: f64, reach: f64) -> Self {
        let side = 2.0 * half_side;
        let n = if reach > 0.0 {
            ((side / (2.0 * reach)).floor() as usize).clamp(1, MAX_CELLS_PER_AXIS)
        } else {
            1
        };
        let cells = n * n * n;
        Self {
            half_side,
            n,
            inv_cell: n as f64 / side,
            reach,
            occupied: vec![0; cells.div_ceil(64)],
            touched: Vec::new(),
            entries: Vec::new(),
            sorted: true,
        }
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn cell_edge(&self) -> f64 {
        1.0 / self.inv_cell
    }

    pub fn clear(&mut self) {
        for &c in &self.touched {
            self.occupied[(c / 64) as usize] = 0;
        }
        self.touched.clear();
        self.entries.clear();
        self.sorted = true;
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    fn axis_cell(&self, x: f64) -> usize {
        let c = ((x + self.half_side) * self.inv_cell) as isize;
        c.clamp(0, self.n as isize - 1) as usize
    }

    #[inline]
    fn cell_id(&self, i: usize, j: usize, k: usize) -> u32 {
        ((i * self.n + j) * self.n + k) as u32
    }

    /// Register molecule `id` at `pos`. Molecules whose binding sphere does
    /// not intersect the cube are ignored.
    pub fn insert(&mut self, id: u32, pos: [f64; 3]) {
        let h = self.half_side;
        let r = self.reach;
        if pos.iter().any(|&x| x + r < -h || x - r > h) {
            return;
        }
        let lo: [usize; 3] = std::array::from_fn(|d| self.axis_cell(pos[d] - r));
        let hi: [usize; 3] = std::array::from_fn(|d| self.axis_cell(pos[d] + r));
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let c = self.cell_id(i, j, k);
                    let (word, bit) = ((c / 64) as usize, c % 64);
                    if self.occupied[word] & (1 << bit) == 0 {
                        if self.occupied[word] == 0 {
                            self.touched.push(c);
                        }
                        self.occupied[word] |= 1 << bit;
                    }
                    self.entries.push((c, id));
                }
            }
        }
        self.sorted = false;
    }

    /// Must be called after the last insert and before any query.
    pub fn finish(&mut self) {
        if !self.sorted {
            self.entries.sort_unstable();
            self.sorted = true;
        }
    }

    /// Cell holding `pos`, if any molecule was registered there.
    #[inline]
    pub fn hit(&self, pos: [f64; 3]) -> Option<u32> {
        let c = self.cell_id(self.axis_cell(pos[0]), self.axis_cell(pos[1]), self.axis_cell(pos[2]));
        if self.occupied[(c / 64) as usize] & (1 << (c % 64)) != 0 {
            Some(c)
        } else {
            None
        }
    }

    /// Molecules registered in cell `c`.
    pub fn members(&self, c: u32) -> impl Iterator<Item = u32> + '_ {
        debug_assert!(self.sorted);
        let start = self.entries.partition_point(|&(cell, _)| cell < c);
        self.entries[start..].iter().take_while(move |&&(cell, _)| cell == c).map(|&(_, id)| id)
    }
}
