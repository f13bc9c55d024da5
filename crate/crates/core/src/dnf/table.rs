//! Dense coefficient tables indexed by master tuples.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    n: usize,
    order: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(n: usize, order: usize) -> Self {
        Self { n, order, data: vec![0.0; n.pow(order as u32)] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.n);
            acc * self.n + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn add(&mut self, idx: &[usize], v: f64) {
        let o = self.offset(idx);
        self.data[o] += v;
    }

    /// All index tuples in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.data.len()).map(move |mut flat| {
            let mut idx = vec![0; self.order];
            for d in (0..self.order).rev() {
                idx[d] = flat % self.n;
                flat /= self.n;
            }
            idx
        })
    }

    pub fn nonzero(&self) -> Vec<(Vec<usize>, f64)> {
        self.indices().zip(&self.data).filter(|(_, v)| **v != 0.0).map(|(i, v)| (i, *v)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self, other: &Table) -> Table {
        assert_eq!((self.n, self.order), (other.n, other.order));
        Table {
            n: self.n,
            order: self.order,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn difference(&self, other: &Table) -> Table {
        assert_eq!((self.n, self.order), (other.n, other.order));
        Table {
            n: self.n,
            order: self.order,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Averages over all permutations of the indices from position `from` on.
    pub fn symmetrized_from(&self, from: usize) -> Table {
        let mut out = Table::zeros(self.n, self.order);
        let perms = permutations(self.order - from);
        for idx in self.indices() {
            let mut acc = 0.0;
            for p in &perms {
                let mut j = idx.clone();
                for (t, &src) in p.iter().enumerate() {
                    j[from + t] = idx[from + src];
                }
                acc += self.get(&j);
            }
            out.set(&idx, acc / perms.len() as f64);
        }
        out
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(rest: Vec<usize>, acc: Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(acc);
            return;
        }
        for i in 0..rest.len() {
            let mut r = rest.clone();
            let x = r.remove(i);
            let mut a = acc.clone();
            a.push(x);
            rec(r, a, out);
        }
    }
    let mut out = Vec::new();
    rec((0..k).collect(), Vec::new(), &mut out);
    out
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    size: usize,
    order: usize,
    /// Nonzero entries as `[i1, .., iorder, value]` with 1-based indices.
    entries: Vec<Vec<f64>>,
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let entries = self
            .nonzero()
            .into_iter()
            .map(|(idx, v)| idx.iter().map(|&i| (i + 1) as f64).chain([v]).collect())
            .collect();
        TableDoc { size: self.n, order: self.order, entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Table {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = TableDoc::deserialize(d)?;
        let mut t = Table::zeros(doc.size, doc.order);
        for e in doc.entries {
            if e.len() != doc.order + 1 {
                return Err(serde::de::Error::custom("table entry has wrong arity"));
            }
            let idx: Vec<usize> = e[..doc.order].iter().map(|&x| x as usize - 1).collect();
            if idx.iter().any(|&i| i >= doc.size) {
                return Err(serde::de::Error::custom("table index out of range"));
            }
            t.set(&idx, e[doc.order]);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_trailing() {
        let mut t = Table::zeros(2, 3);
        t.set(&[0, 0, 1], 2.0);
        let s = t.symmetrized_from(1);
        assert_eq!(s.get(&[0, 0, 1]), 1.0);
        assert_eq!(s.get(&[0, 1, 0]), 1.0);
    }

    #[test]
    fn serde_round_trip() {
        let mut t = Table::zeros(3, 2);
        t.set(&[2, 1], -0.25);
        let j = serde_json::to_string(&t).unwrap();
        let back: Table = serde_json::from_str(&j).unwrap();
        assert_eq!(t, back);
    }
}
