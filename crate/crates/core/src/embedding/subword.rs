//! Character n-grams and their hash buckets.

const FNV_OFFSET: u32 = 0x811c_9dc5;
const FNV_PRIME: u32 = 0x0100_0193;

/// 32-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u32 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u32).wrapping_mul(FNV_PRIME))
}

/// Character n-grams of `<word>` with lengths in `min_n..=max_n`, in
/// order of start position then length.
pub fn char_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    if min_n == 0 || max_n < min_n {
        return Vec::new();
    }
    let chars: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let mut out = Vec::new();
    for start in 0..chars.len() {
        for n in min_n..=max_n {
            if start + n > chars.len() {
                break;
            }
            out.push(chars[start..start + n].iter().collect());
        }
    }
    out
}

pub fn ngram_buckets(word: &str, min_n: usize, max_n: usize, buckets: u32) -> Vec<u32> {
    char_ngrams(word, min_n, max_n)
        .iter()
        .map(|g| fnv1a(g.as_bytes()) % buckets)
        .collect()
}
