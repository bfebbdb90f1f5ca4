use crate::dsl::Token;

const OFFSET: u128 = 0x6c62272e07bb014262b821756295c58d;
const PRIME: u128 = 0x0000000001000000000000000000013B;

/// Incremental 128-bit FNV-1a over the canonical rendering of a token
/// sequence (tokens joined by single spaces). Cloning forks the state, so a
/// prefix hash is extended per candidate without rehashing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fingerprinter {
    state: u128,
    empty: bool,
}

impl Default for Fingerprinter {
    fn default() -> Self {
        Fingerprinter {
            state: OFFSET,
            empty: true,
        }
    }
}

impl Fingerprinter {
    pub fn new() -> Fingerprinter {
        Fingerprinter::default()
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state ^= b as u128;
            self.state = self.state.wrapping_mul(PRIME);
        }
    }

    pub fn push(&mut self, t: &Token) {
        if !self.empty {
            self.write(b" ");
        }
        self.empty = false;
        self.write(t.to_string().as_bytes());
    }

    pub fn with(&self, t: &Token) -> Fingerprinter {
        let mut f = *self;
        f.push(t);
        f
    }

    pub fn value(&self) -> u128 {
        self.state
    }
}

/// Fingerprint of a whole rendering.
pub fn fingerprint_str(rendering: &str) -> u128 {
    let mut f = Fingerprinter::new();
    f.write(rendering.as_bytes());
    f.state
}

pub fn fingerprint(tokens: &[Token]) -> u128 {
    let mut f = Fingerprinter::new();
    for t in tokens {
        f.push(t);
    }
    f.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Program;

    #[test]
    fn incremental_equals_whole_string() {
        let p = Program::parse("(count all_rows) <EOS>").unwrap();
        assert_eq!(fingerprint(p.tokens()), fingerprint_str(&p.render()));
        assert_eq!(fingerprint(&[]), fingerprint_str(""));
        assert_ne!(fingerprint(&p.tokens()[..2]), fingerprint(p.tokens()));
    }

    #[test]
    fn known_vector() {
        // FNV-1a 128 of "a"
        assert_eq!(fingerprint_str("a"), 0xd228cb696f1a8caf78912b704e4a8964);
    }
}
