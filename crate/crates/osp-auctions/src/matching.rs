//! Incremental maximum-weight bipartite matching with exact integer weights.
//!
//! Rows may stay unmatched (outside option of weight 0). The structure keeps
//! an optimal matching together with a feasible dual `(u, p)`:
//! `u, p >= 0`, `u[r] + p[c] >= w[r][c]`, matched edges tight, unmatched rows
//! and unmatched columns at zero. Rows are inserted and columns deleted with
//! one shortest-path search each, and the loss from deleting any single
//! column is available for all columns at once from one backward search.

const INF: i128 = i128::MAX / 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Terminal {
    Row(usize),
    Col(usize),
}

#[derive(Clone, Debug)]
pub struct IncrementalMatching {
    alive: Vec<bool>,
    weights: Vec<Vec<i128>>,
    row_match: Vec<Option<usize>>,
    col_match: Vec<Option<usize>>,
    u: Vec<i128>,
    p: Vec<i128>,
    value: i128,
}

impl IncrementalMatching {
    pub fn new(cols: usize) -> Self {
        IncrementalMatching {
            alive: vec![true; cols],
            weights: Vec::new(),
            row_match: Vec::new(),
            col_match: vec![None; cols],
            u: Vec::new(),
            p: vec![0; cols],
            value: 0,
        }
    }

    pub fn cols(&self) -> usize {
        self.alive.len()
    }

    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    pub fn is_alive(&self, c: usize) -> bool {
        self.alive[c]
    }

    /// Total weight of the current optimal matching.
    pub fn value(&self) -> i128 {
        self.value
    }

    pub fn row_match(&self, r: usize) -> Option<usize> {
        self.row_match[r]
    }

    pub fn col_match(&self, c: usize) -> Option<usize> {
        self.col_match[c]
    }

    fn reduced(&self, r: usize, c: usize) -> i128 {
        self.u[r] + self.p[c] - self.weights[r][c]
    }

    /// Adds a row and re-optimizes. Returns the row index.
    pub fn add_row(&mut self, weights: Vec<i128>) -> usize {
        assert_eq!(weights.len(), self.cols(), "row width must equal the column count");
        let r = self.weights.len();
        let mut u = 0;
        for (c, w) in weights.iter().enumerate() {
            if self.alive[c] {
                u = u.max(w - self.p[c]);
            }
        }
        self.weights.push(weights);
        self.row_match.push(None);
        self.u.push(u);
        self.insert(r);
        r
    }

    /// Deletes a column for good and re-optimizes.
    pub fn remove_col(&mut self, c: usize) {
        if !self.alive[c] {
            return;
        }
        self.alive[c] = false;
        if let Some(r) = self.col_match[c].take() {
            self.value -= self.weights[r][c];
            self.row_match[r] = None;
            self.insert(r);
        }
        self.p[c] = 0;
    }

    /// Re-optimizes after row `r` became unmatched with a feasible dual.
    fn insert(&mut self, r: usize) {
        let rows = self.rows();
        let cols = self.cols();
        let mut dist_col = vec![INF; cols];
        let mut from_row = vec![usize::MAX; cols];
        let mut used_col = vec![false; cols];
        let mut visited_rows: Vec<(usize, i128)> = Vec::with_capacity(rows);
        let mut visited_cols: Vec<(usize, i128)> = Vec::with_capacity(cols);
        let mut best = INF;
        let mut terminal = Terminal::Row(r);

        let mut x = r;
        let mut d = 0i128;
        loop {
            visited_rows.push((x, d));
            if d + self.u[x] < best {
                best = d + self.u[x];
                terminal = Terminal::Row(x);
            }
            let own = self.row_match[x];
            for c in 0..cols {
                if !self.alive[c] || used_col[c] || own == Some(c) {
                    continue;
                }
                let nd = d + self.reduced(x, c);
                if nd < dist_col[c] {
                    dist_col[c] = nd;
                    from_row[c] = x;
                }
            }
            let mut next: Option<(usize, i128)> = None;
            for c in 0..cols {
                if self.alive[c] && !used_col[c] && dist_col[c] < next.map_or(INF, |t| t.1) {
                    next = Some((c, dist_col[c]));
                }
            }
            let Some((c, dc)) = next else { break };
            if dc >= best {
                break;
            }
            used_col[c] = true;
            visited_cols.push((c, dc));
            match self.col_match[c] {
                None => {
                    best = dc;
                    terminal = Terminal::Col(c);
                    break;
                }
                Some(y) => {
                    x = y;
                    d = dc;
                }
            }
        }

        for &(x, d) in &visited_rows {
            self.u[x] -= best - d;
        }
        for &(c, d) in &visited_cols {
            self.p[c] += best - d;
        }

        let mut c = match terminal {
            Terminal::Row(z) if z == r => return,
            Terminal::Row(z) => {
                let c = self.row_match[z].take().expect("terminal row is matched");
                self.value -= self.weights[z][c];
                c
            }
            Terminal::Col(c) => c,
        };
        loop {
            let x = from_row[c];
            let old = self.row_match[x];
            if let Some(oc) = old {
                self.value -= self.weights[x][oc];
            }
            self.row_match[x] = Some(c);
            self.col_match[c] = Some(x);
            self.value += self.weights[x][c];
            match old {
                None => break,
                Some(oc) => c = oc,
            }
        }
    }

    /// For every column `c`: optimum now minus optimum with `c` deleted.
    /// Dead and unmatched columns report zero.
    pub fn removal_losses(&self) -> Vec<i128> {
        let rows = self.rows();
        let cols = self.cols();
        // h[x]: cheapest way to re-home row x after it loses its column.
        let mut h = vec![INF; rows];
        let mut done = vec![false; rows];
        for x in 0..rows {
            if self.row_match[x].is_none() {
                done[x] = true;
                continue;
            }
            let own = self.row_match[x];
            let mut best = self.u[x];
            for c in 0..cols {
                if self.alive[c] && own != Some(c) && self.col_match[c].is_none() {
                    best = best.min(self.reduced(x, c));
                }
            }
            h[x] = best;
        }
        loop {
            let mut next: Option<usize> = None;
            for y in 0..rows {
                if !done[y] && next.is_none_or(|b| h[y] < h[b]) {
                    next = Some(y);
                }
            }
            let Some(y) = next else { break };
            done[y] = true;
            let cy = self.row_match[y].expect("pending rows are matched");
            for x in 0..rows {
                if !done[x] {
                    let cand = h[y] + self.reduced(x, cy);
                    if cand < h[x] {
                        h[x] = cand;
                    }
                }
            }
        }
        (0..cols)
            .map(|c| match self.col_match[c] {
                Some(x) if self.alive[c] => self.p[c] + h[x],
                _ => 0,
            })
            .collect()
    }
}

/// Maximum-weight matching of a dense weight matrix (rows may stay unmatched).
pub fn max_weight_matching(weights: &[Vec<i128>], cols: usize) -> (i128, Vec<Option<usize>>) {
    let mut m = IncrementalMatching::new(cols);
    for row in weights {
        m.add_row(row.clone());
    }
    let assignment = (0..m.rows()).map(|r| m.row_match(r)).collect();
    (m.value(), assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(weights: &[Vec<i128>], alive: &[bool]) -> i128 {
        fn go(r: usize, used: u64, w: &[Vec<i128>], alive: &[bool]) -> i128 {
            if r == w.len() {
                return 0;
            }
            let mut best = go(r + 1, used, w, alive);
            for c in 0..alive.len() {
                if alive[c] && used >> c & 1 == 0 {
                    best = best.max(w[r][c] + go(r + 1, used | 1 << c, w, alive));
                }
            }
            best
        }
        go(0, 0, weights, alive)
    }

    fn lcg(seed: &mut u64) -> i128 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 33) % 7) as i128 - 1
    }

    #[test]
    fn matches_brute_force_under_inserts_and_deletes() {
        let mut seed = 7u64;
        for _ in 0..400 {
            let rows = 1 + (lcg(&mut seed).unsigned_abs() as usize % 4);
            let cols = 1 + (lcg(&mut seed).unsigned_abs() as usize % 4);
            let w: Vec<Vec<i128>> = (0..rows)
                .map(|_| (0..cols).map(|_| lcg(&mut seed)).collect())
                .collect();
            let mut m = IncrementalMatching::new(cols);
            let mut alive = vec![true; cols];
            for r in 0..rows {
                m.add_row(w[r].clone());
                assert_eq!(m.value(), brute(&w[..=r], &alive));
            }
            let losses = m.removal_losses();
            for c in 0..cols {
                let mut a2 = alive.clone();
                a2[c] = false;
                assert_eq!(losses[c], m.value() - brute(&w, &a2), "loss of column {c}");
            }
            let c = lcg(&mut seed).unsigned_abs() as usize % cols;
            m.remove_col(c);
            alive[c] = false;
            assert_eq!(m.value(), brute(&w, &alive));
        }
    }
}
