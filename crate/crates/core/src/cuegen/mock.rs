//! Deterministic offline providers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{meaning_head, parse_verbal_prompt, ImageProvider, ProviderConfig, ProviderError, TextProvider};

/// Templates used by [`MockTextProvider::new`]. `{keyword}` is the keyword,
/// `{meaning}` the meaning as given and `{head}` the meaning without "to ".
pub const DEFAULT_TEMPLATES: &[&str] = &[
    "Imagine a {keyword} {head}.",
    "Imagine {keyword} sitting right beside a {head}!",
    "Imagine a giant {keyword} that can {head}.",
    "Imagine the word {head} painted on a {keyword}.",
    "Imagine a {head} hidden inside a {keyword}!",
];

/// Picks a template from a bank by hashing `(seed, keyword, meaning)`.
#[derive(Debug, Clone)]
pub struct MockTextProvider {
    templates: Vec<String>,
}

impl Default for MockTextProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl MockTextProvider {
    pub fn new() -> Self {
        Self::with_templates(DEFAULT_TEMPLATES.iter().map(|t| t.to_string()).collect())
    }

    pub fn with_templates(templates: Vec<String>) -> Self {
        assert!(!templates.is_empty(), "template bank must not be empty");
        Self { templates }
    }

    fn pick(&self, seed: u64, keyword: &str, meaning: &str) -> &str {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(keyword.as_bytes());
        h.update([0]);
        h.update(meaning.as_bytes());
        let d = h.finalize();
        let n = u64::from_le_bytes(d[..8].try_into().expect("8 bytes"));
        &self.templates[(n % self.templates.len() as u64) as usize]
    }
}

impl TextProvider for MockTextProvider {
    fn complete(&self, prompt: &str, config: &ProviderConfig) -> Result<String, ProviderError> {
        let (keyword, meaning) =
            parse_verbal_prompt(prompt).ok_or_else(|| ProviderError::UnknownPrompt(prompt.to_string()))?;
        Ok(self
            .pick(config.seed, keyword, meaning)
            .replace("{keyword}", keyword)
            .replace("{meaning}", meaning)
            .replace("{head}", meaning_head(meaning)))
    }
}

/// Replays a fixed list of completions, then keeps returning the last one.
#[derive(Debug)]
pub struct ScriptedTextProvider {
    script: Vec<String>,
    calls: AtomicUsize,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedTextProvider {
    pub fn new(script: Vec<String>) -> Self {
        assert!(!script.is_empty(), "script must not be empty");
        Self {
            script,
            calls: AtomicUsize::new(0),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn repeating(response: &str) -> Self {
        Self::new(vec![response.to_string()])
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Prompts received so far, in call order.
    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().expect("prompt log").clone()
    }
}

impl TextProvider for ScriptedTextProvider {
    fn complete(&self, prompt: &str, _config: &ProviderConfig) -> Result<String, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        self.prompts.lock().expect("prompt log").push(prompt.to_string());
        Ok(self.script[n.min(self.script.len() - 1)].clone())
    }
}

/// `SHA-256(seed as little-endian u64 || prompt)`.
pub fn image_digest(prompt: &str, seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(prompt.as_bytes());
    h.finalize().into()
}

pub const MOCK_IMAGE_WIDTH: u32 = 8;
pub const MOCK_IMAGE_HEIGHT: u32 = 4;
/// Offset of the pixel array in a mock image.
pub const MOCK_PIXEL_OFFSET: usize = 54;

/// An 8x4 top-down 24-bit BMP whose i-th pixel is the gray level of digest
/// byte i.
pub fn mock_image_bytes(prompt: &str, seed: u64) -> Vec<u8> {
    let digest = image_digest(prompt, seed);
    let pixels = (MOCK_IMAGE_WIDTH * MOCK_IMAGE_HEIGHT * 3) as usize;
    let file_size = (MOCK_PIXEL_OFFSET + pixels) as u32;

    let mut out = Vec::with_capacity(file_size as usize);
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&file_size.to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&(MOCK_PIXEL_OFFSET as u32).to_le_bytes());
    // BITMAPINFOHEADER
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&(MOCK_IMAGE_WIDTH as i32).to_le_bytes());
    out.extend_from_slice(&(-(MOCK_IMAGE_HEIGHT as i32)).to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&24u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(pixels as u32).to_le_bytes());
    out.extend_from_slice(&2835i32.to_le_bytes());
    out.extend_from_slice(&2835i32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    debug_assert_eq!(out.len(), MOCK_PIXEL_OFFSET);
    // rows are 24 bytes wide, already 4-byte aligned
    for b in digest {
        out.extend_from_slice(&[b, b, b]);
    }
    out
}

/// Renders [`mock_image_bytes`] for the prompt and the config seed.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockImageProvider;

impl ImageProvider for MockImageProvider {
    fn render(&self, prompt: &str, config: &ProviderConfig) -> Result<Vec<u8>, ProviderError> {
        Ok(mock_image_bytes(prompt, config.seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_choice_depends_on_seed_and_inputs_only() {
        let p = MockTextProvider::new();
        let prompt = super::super::build_verbal_prompt("flashy", "bottle");
        let c = |seed| p.complete(&prompt, &ProviderConfig { seed, ..Default::default() }).unwrap();
        assert_eq!(c(3), c(3));
        let distinct: std::collections::HashSet<String> = (0..40).map(c).collect();
        assert!(distinct.len() > 1);
        for text in distinct {
            assert!(super::super::validate_verbal_cue(&text, "flashy", "bottle").is_ok(), "{text}");
        }
    }

    #[test]
    fn unknown_prompt_is_an_error() {
        let p = MockTextProvider::new();
        assert!(p.complete("hello", &ProviderConfig::default()).is_err());
    }

    #[test]
    fn mock_image_is_a_well_formed_bmp() {
        let bytes = mock_image_bytes("a pot!", 1);
        assert_eq!(&bytes[..2], b"BM");
        assert_eq!(u32::from_le_bytes(bytes[2..6].try_into().unwrap()) as usize, bytes.len());
        assert_eq!(bytes.len(), 54 + 96);
        assert_ne!(mock_image_bytes("a pot!", 2), bytes);
    }
}
