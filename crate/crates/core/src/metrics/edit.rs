//! Levenshtein distance with unit costs.

/// One step of an optimal edit script turning `a` into `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match { a: usize, b: usize },
    Substitute { a: usize, b: usize },
    /// `a[a]` has no counterpart in `b`.
    Delete { a: usize },
    /// `b[b]` has no counterpart in `a`.
    Insert { b: usize },
}

impl EditOp {
    pub fn is_edit(self) -> bool {
        !matches!(self, EditOp::Match { .. })
    }
}

pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    edit_distance_by(a, b, |x, y| x == y)
}

/// Levenshtein distance where `eq(a[i], b[j])` decides whether two elements
/// match. Runs in `O(|a|·|b|)` time and `O(|b|)` space.
pub fn edit_distance_by<A, B>(a: &[A], b: &[B], eq: impl Fn(&A, &B) -> bool) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let cost = usize::from(!eq(x, y));
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance over Unicode scalar values.
pub fn char_edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

/// `ED(a, b) / max(|a|, |b|)` in characters; 0 when both are empty.
pub fn normalized_edit_distance(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let max_len = a.len().max(b.len());
    if max_len == 0 {
        return 0.0;
    }
    edit_distance(&a, &b) as f64 / max_len as f64
}

/// An optimal edit script. Ties are broken in the order diagonal, delete,
/// insert, walking back from the end, so the script is deterministic.
pub fn edit_script_by<A, B>(a: &[A], b: &[B], eq: impl Fn(&A, &B) -> bool) -> Vec<EditOp> {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut table = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        table[j] = j;
    }
    for i in 1..=n {
        table[i * w] = i;
        for j in 1..=m {
            let cost = usize::from(!eq(&a[i - 1], &b[j - 1]));
            table[i * w + j] = (table[(i - 1) * w + j - 1] + cost)
                .min(table[(i - 1) * w + j] + 1)
                .min(table[i * w + j - 1] + 1);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = table[i * w + j];
        if i > 0 && j > 0 {
            let same = eq(&a[i - 1], &b[j - 1]);
            if here == table[(i - 1) * w + j - 1] + usize::from(!same) {
                ops.push(if same {
                    EditOp::Match { a: i - 1, b: j - 1 }
                } else {
                    EditOp::Substitute { a: i - 1, b: j - 1 }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == table[(i - 1) * w + j] + 1 {
            ops.push(EditOp::Delete { a: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insert { b: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    ops
}
