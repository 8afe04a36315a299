//! Deterministic mutation shake-out for the parser, runnable on stable
//! (the `fuzz/` targets need nightly). Mutates the checked-in seeds and
//! feeds them through parse/print/parse, panicking on any crash.
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn main() {
    let mut rng = StdRng::seed_from_u64(0xf422);
    let seeds: Vec<String> = std::fs::read_dir("fuzz/corpus/parse_program")
        .unwrap()
        .flatten()
        .filter_map(|e| std::fs::read_to_string(e.path()).ok())
        .collect();
    let tokens = [
        "|>", "<:", "o+", "~", "(", ")", "<", ">", "forall", "Pi", "Sigma", "Sing", "syn[",
        "ana[", "foldPi", "/\\", "\\", ".", ";", ":", "'x", "++", "|||", "->", "=>", "[", "]",
    ];
    let mut count = 0u64;
    for round in 0..60_000u64 {
        let mut s = seeds[(round as usize) % seeds.len()].clone();
        let mutations = rng.gen_range(1..8);
        for _ in 0..mutations {
            match rng.gen_range(0..4) {
                0 => {
                    // Delete a random slice.
                    if s.len() > 2 {
                        let a = rng.gen_range(0..s.len());
                        let b = (a + rng.gen_range(1..20)).min(s.len());
                        if s.is_char_boundary(a) && s.is_char_boundary(b) {
                            s.replace_range(a..b, "");
                        }
                    }
                }
                1 => {
                    // Insert a token.
                    let at = rng.gen_range(0..=s.len());
                    if s.is_char_boundary(at) {
                        s.insert_str(at, tokens[rng.gen_range(0..tokens.len())]);
                    }
                }
                2 => {
                    // Duplicate a slice.
                    if s.len() > 2 {
                        let a = rng.gen_range(0..s.len());
                        let b = (a + rng.gen_range(1..30)).min(s.len());
                        if s.is_char_boundary(a) && s.is_char_boundary(b) {
                            let piece = s[a..b].to_string();
                            s.insert_str(a, &piece);
                        }
                    }
                }
                _ => {
                    // Flip a byte to random ASCII.
                    if !s.is_empty() {
                        let at = rng.gen_range(0..s.len());
                        if s.is_char_boundary(at) && at + 1 <= s.len() && s.is_char_boundary(at + 1)
                        {
                            let c = rng.gen_range(0x20u8..0x7f) as char;
                            s.replace_range(at..at + 1, &c.to_string());
                        }
                    }
                }
            }
        }
        if let Ok(p) = rowo_core::surface::parse(&s) {
            let printed = rowo_core::surface::print_program(&p);
            let _ = rowo_core::surface::parse(&printed);
        }
        let _ = rowo_core::surface::parse_repl(&s, &Default::default());
        count += 1;
    }
    println!("fuzzed {count} mutated inputs without a panic");
}
