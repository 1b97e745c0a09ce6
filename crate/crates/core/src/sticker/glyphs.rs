//! Bundled 5x7 bitmap alphabet used as sticker shapes.

use serde::{Deserialize, Serialize};

use crate::rng::{rng_for, stream};
use rand::seq::SliceRandom;

const FONT: [[&str; 7]; 26] = [
    [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."],
    [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."],
    ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."],
    ["#####", "#....", "#....", "####.", "#....", "#....", "#####"],
    ["#####", "#....", "#....", "####.", "#....", "#....", "#...."],
    [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"],
    ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    [".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."],
    ["..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."],
    ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"],
    ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
    ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"],
    ["#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"],
    [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."],
    [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
    ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"],
    [".####", "#....", "#....", ".###.", "....#", "....#", "####."],
    ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
    ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
    ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
    ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."],
    ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
    ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."],
    ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
];

pub const ALPHABET_SIZE: usize = FONT.len();

/// Binary glyph, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitmap {
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<bool>,
}

impl Bitmap {
    pub fn letter(index: usize) -> Self {
        let glyph = &FONT[index];
        let bits = glyph.iter().flat_map(|row| row.chars().map(|c| c == '#')).collect();
        Self { rows: 7, cols: 5, bits }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    /// Clockwise quarter turns, matching [`crate::dataio::Image::rotate90`].
    pub fn rotate90(&self, k: usize) -> Self {
        let mut out = self.clone();
        for _ in 0..(k % 4) {
            let (r, c) = (out.rows, out.cols);
            let mut bits = vec![false; r * c];
            for y in 0..r {
                for x in 0..c {
                    bits[x * r + (r - 1 - y)] = out.get(y, x);
                }
            }
            out = Self { rows: c, cols: r, bits };
        }
        out
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// The sticker classes in use: a seeded subset of the alphabet. Sharing the
/// seed between source and target sides is all the coordination needed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlyphSet {
    letters: Vec<usize>,
}

impl GlyphSet {
    pub fn random(classes: usize, seed: u64) -> Self {
        assert!(
            (2..=ALPHABET_SIZE).contains(&classes),
            "sticker classes must be in [2, {ALPHABET_SIZE}]"
        );
        let mut all: Vec<usize> = (0..ALPHABET_SIZE).collect();
        all.shuffle(&mut rng_for(seed, stream::GLYPH_SUBSET, 0));
        all.truncate(classes);
        Self { letters: all }
    }

    pub fn from_letters(letters: Vec<usize>) -> Self {
        assert!(letters.iter().all(|&l| l < ALPHABET_SIZE));
        Self { letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn bitmap(&self, glyph_index: usize) -> Bitmap {
        Bitmap::letter(self.letters[glyph_index])
    }

    pub fn char_of(&self, glyph_index: usize) -> char {
        (b'A' + self.letters[glyph_index] as u8) as char
    }
}
