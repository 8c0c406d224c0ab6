use super::Ltl;
use crate::alphabet::Valuation;

/// Ultimately periodic word `prefix · cycle^ω`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LassoTrace {
    pub prefix: Vec<Valuation>,
    pub cycle: Vec<Valuation>,
}

impl LassoTrace {
    pub fn new(prefix: Vec<Valuation>, cycle: Vec<Valuation>) -> Self {
        assert!(!cycle.is_empty(), "lasso cycle must be non-empty");
        LassoTrace { prefix, cycle }
    }

    /// Number of distinct positions.
    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn loop_start(&self) -> usize {
        self.prefix.len()
    }

    /// Letter at position `k` of the infinite word.
    pub fn at(&self, k: usize) -> Valuation {
        if k < self.prefix.len() {
            self.prefix[k]
        } else {
            self.cycle[(k - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// Successor of a lasso position.
    pub fn succ(&self, pos: usize) -> usize {
        if pos + 1 < self.len() {
            pos + 1
        } else {
            self.loop_start()
        }
    }
}

/// Whether the word satisfies the formula at its first position.
pub fn evaluate_on_lasso(formula: &Ltl, trace: &LassoTrace) -> bool {
    let n = trace.len();
    if n <= 64 {
        let letters: Vec<Valuation> = trace.prefix.iter().chain(&trace.cycle).copied().collect();
        let sets = SmallLasso {
            letters: &letters,
            n,
            p: trace.loop_start(),
            full: if n == 64 { !0 } else { (1u64 << n) - 1 },
        };
        sets.eval(formula) & 1 == 1
    } else {
        eval_wide(formula, trace)[0]
    }
}

// positions as bits of one word
struct SmallLasso<'a> {
    letters: &'a [Valuation],
    n: usize,
    p: usize,
    full: u64,
}

impl SmallLasso<'_> {
    fn next(&self, s: u64) -> u64 {
        (s >> 1) | (((s >> self.p) & 1) << (self.n - 1))
    }

    fn eval(&self, f: &Ltl) -> u64 {
        match f {
            Ltl::True => self.full,
            Ltl::False => 0,
            Ltl::Atom(a) => {
                let mut s = 0;
                for (i, &v) in self.letters.iter().enumerate() {
                    s |= ((v >> a) & 1) << i;
                }
                s
            }
            Ltl::Not(a) => !self.eval(a) & self.full,
            Ltl::And(a, b) => self.eval(a) & self.eval(b),
            Ltl::Or(a, b) => self.eval(a) | self.eval(b),
            Ltl::Next(a) => self.next(self.eval(a)),
            Ltl::Until(a, b) => {
                let (sa, sb) = (self.eval(a), self.eval(b));
                let mut z = 0;
                loop {
                    let nz = sb | (sa & self.next(z));
                    if nz == z {
                        return z;
                    }
                    z = nz;
                }
            }
            Ltl::Release(a, b) => {
                let (sa, sb) = (self.eval(a), self.eval(b));
                let mut z = self.full;
                loop {
                    let nz = sb & (sa | self.next(z));
                    if nz == z {
                        return z;
                    }
                    z = nz;
                }
            }
            Ltl::Globally(a) => self.eval(&Ltl::release(Ltl::False, (**a).clone())),
            Ltl::Finally(a) => self.eval(&Ltl::until(Ltl::True, (**a).clone())),
        }
    }
}

fn eval_wide(f: &Ltl, t: &LassoTrace) -> Vec<bool> {
    let n = t.len();
    let next = |s: &[bool]| -> Vec<bool> { (0..n).map(|i| s[t.succ(i)]).collect() };
    let fix = |sa: Vec<bool>, sb: Vec<bool>, least: bool| -> Vec<bool> {
        let mut z = vec![!least; n];
        loop {
            let xz = next(&z);
            let nz: Vec<bool> = (0..n)
                .map(|i| {
                    if least {
                        sb[i] || (sa[i] && xz[i])
                    } else {
                        sb[i] && (sa[i] || xz[i])
                    }
                })
                .collect();
            if nz == z {
                return z;
            }
            z = nz;
        }
    };
    match f {
        Ltl::True => vec![true; n],
        Ltl::False => vec![false; n],
        Ltl::Atom(a) => (0..n).map(|i| (t.at(i) >> a) & 1 == 1).collect(),
        Ltl::Not(a) => eval_wide(a, t).into_iter().map(|b| !b).collect(),
        Ltl::And(a, b) => zip(eval_wide(a, t), eval_wide(b, t), |x, y| x && y),
        Ltl::Or(a, b) => zip(eval_wide(a, t), eval_wide(b, t), |x, y| x || y),
        Ltl::Next(a) => next(&eval_wide(a, t)),
        Ltl::Until(a, b) => fix(eval_wide(a, t), eval_wide(b, t), true),
        Ltl::Release(a, b) => fix(eval_wide(a, t), eval_wide(b, t), false),
        Ltl::Globally(a) => fix(vec![false; n], eval_wide(a, t), false),
        Ltl::Finally(a) => fix(vec![true; n], eval_wide(a, t), true),
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}
