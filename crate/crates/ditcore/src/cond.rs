//! Conditioning: caption tokenizer + toy text encoder, lyric embeddings,
//! timbre reference encoder, and learned null-condition constants.

use crate::config::DiTConfig;
use crate::{DitError, Result};
use candle_core::{Module, Tensor};
use latentcodec::LatentSeq;
use nnkit::{Builder, Params, TensorRng};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Word-level tokenizer over the closed synthetic caption vocabulary.
pub struct CaptionTokenizer {
    word_to_id: HashMap<String, u32>,
    words: Vec<String>,
}

pub const CAPTION_PAD: u32 = 0;
pub const CAPTION_UNK: u32 = 1;

impl CaptionTokenizer {
    pub fn new() -> Self {
        let mut words: Vec<String> = vec!["<pad>".into(), "<unk>".into()];
        for w in [
            "a", "track", "at", "bpm", "in", "featuring", "and", "major", "minor",
        ] {
            words.push(w.into());
        }
        for style in ["ambient", "hymn", "lofi", "ballad", "house", "pop", "techno", "dnb"] {
            words.push(style.into());
        }
        for pc in ["c", "c#", "d", "d#", "e", "f", "f#", "g", "g#", "a#", "b"] {
            // "a" already present as an article; pitch A shares it.
            words.push(pc.into());
        }
        for instr in ["kick", "bass", "lead", "pad", "vocal"] {
            words.push(instr.into());
        }
        for n in 60..=180u32 {
            words.push(n.to_string());
        }
        let word_to_id =
            words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self { word_to_id, words }
    }

    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.to_lowercase()
            .replace([',', '.'], " ")
            .split_whitespace()
            .map(|w| *self.word_to_id.get(w).unwrap_or(&CAPTION_UNK))
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&i| self.words.get(i as usize).map(String::as_str).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Default for CaptionTokenizer {
    fn default() -> Self {
        Self::new()
    }
}

/// Raw (un-embedded) conditioning inputs for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondInputs {
    pub caption_tokens: Vec<u32>,
    pub lyric_tokens: Vec<u32>,
    /// Timbre reference as a latent sequence (already codec-encoded).
    pub timbre_latent: Option<LatentSeq>,
    /// Classifier-free dropout flags: caption / lyrics / timbre.
    pub null_caption: bool,
    pub null_lyrics: bool,
    pub null_timbre: bool,
}

impl CondInputs {
    pub fn new(caption_tokens: Vec<u32>, lyric_tokens: Vec<u32>) -> Self {
        Self {
            caption_tokens,
            lyric_tokens,
            timbre_latent: None,
            null_caption: false,
            null_lyrics: false,
            null_timbre: false,
        }
    }

    /// Fully nulled variant (the CFG unconditional branch).
    pub fn all_null(&self) -> Self {
        Self {
            caption_tokens: self.caption_tokens.clone(),
            lyric_tokens: self.lyric_tokens.clone(),
            timbre_latent: None,
            null_caption: true,
            null_lyrics: true,
            null_timbre: true,
        }
    }
}

/// Embedded conditioning context for the cross-attention stack.
pub struct ConditionBundle {
    /// `(S, width)` context: `[caption | timbre | lyrics]`.
    pub context: Tensor,
    /// Column range of the lyric segment within the context.
    pub lyric_range: (usize, usize),
    pub null_flags: (bool, bool, bool),
}

impl ConditionBundle {
    pub fn lyric_len(&self) -> usize {
        self.lyric_range.1 - self.lyric_range.0
    }
}

/// All condition encoders (trained jointly with the DiT).
pub struct CondEncoders {
    pub config: DiTConfig,
    caption_emb: candle_nn::Embedding,
    caption_pos: Tensor,
    text_blocks: Vec<TextBlock>,
    lyric_emb: candle_nn::Embedding,
    timbre_convs: Vec<candle_nn::Conv1d>,
    timbre_out: candle_nn::Linear,
    null_caption: Tensor,
    null_lyrics: Tensor,
    null_timbre: Tensor,
    seg_emb: Tensor,
}

struct TextBlock {
    norm1: candle_nn::LayerNorm,
    qkv: candle_nn::Linear,
    out: candle_nn::Linear,
    norm2: candle_nn::LayerNorm,
    ff1: candle_nn::Linear,
    ff2: candle_nn::Linear,
    heads: usize,
}

impl TextBlock {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (s, d) = x.dims2()?;
        let h = self.norm1.forward(x)?;
        let qkv = self.qkv.forward(&h)?;
        let hd = d / self.heads;
        let split = |i: usize| -> candle_core::Result<Tensor> {
            qkv.narrow(1, i * d, d)?
                .reshape((s, self.heads, hd))?
                .transpose(0, 1)?
                .contiguous()
        };
        let (q, k, v) = (split(0)?, split(1)?, split(2)?);
        let att = (q.matmul(&k.transpose(1, 2)?)? / (hd as f64).sqrt())?;
        let att = candle_nn::ops::softmax(&att, 2)?;
        let o = att.matmul(&v)?.transpose(0, 1)?.reshape((s, d))?;
        let x = (x + self.out.forward(&o)?)?;
        let h = self.norm2.forward(&x)?;
        let ff = self.ff2.forward(&candle_nn::ops::silu(&self.ff1.forward(&h)?)?)?;
        Ok((x + ff)?)
    }
}

/// Max caption length kept for positional table sizing.
const MAX_CAPTION_LEN: usize = 32;

impl CondEncoders {
    pub fn build(
        config: &DiTConfig,
        vocab_size: usize,
        params: &mut Params,
        rng: &mut TensorRng,
    ) -> Result<Self> {
        let d = config.width;
        let mut b = Builder::new(params, rng);
        let mut b = b.sub("cond");
        let caption_emb = b.embedding("caption_emb", vocab_size, d)?;
        let caption_pos = b.var("caption_pos", &[MAX_CAPTION_LEN, d], 0.02)?;
        let mut text_blocks = Vec::new();
        for i in 0..config.text_layers {
            let mut tb = b.sub(&format!("text{i}"));
            text_blocks.push(TextBlock {
                norm1: tb.layer_norm("norm1", d)?,
                qkv: tb.linear("qkv", d, 3 * d)?,
                out: tb.linear("out", d, d)?,
                norm2: tb.layer_norm("norm2", d)?,
                ff1: tb.linear("ff1", d, 2 * d)?,
                ff2: tb.linear("ff2", 2 * d, d)?,
                heads: 4,
            });
        }
        // Lyric keys carry no positional signal: each column of the
        // cross-attention map must depend on its token identity alone.
        let lyric_emb = b.embedding("lyric_emb", config.lyric_vocab, d)?;
        let timbre_convs = vec![
            b.conv1d("timbre0", config.latent_dim, d / 2, 8, 4, 2)?,
            b.conv1d("timbre1", d / 2, d / 2, 8, 4, 2)?,
            b.conv1d("timbre2", d / 2, d, 8, 4, 2)?,
        ];
        let timbre_out = b.linear("timbre_out", d, d)?;
        let null_caption = b.var("null_caption", &[1, d], 0.02)?;
        let null_lyrics = b.var("null_lyrics", &[1, d], 0.02)?;
        let null_timbre = b.var("null_timbre", &[1, d], 0.02)?;
        let seg_emb = b.var("seg_emb", &[3, d], 0.02)?;
        Ok(Self {
            config: config.clone(),
            caption_emb,
            caption_pos,
            text_blocks,
            lyric_emb,
            timbre_convs,
            timbre_out,
            null_caption,
            null_lyrics,
            null_timbre,
            seg_emb,
        })
    }

    fn encode_caption(&self, tokens: &[u32]) -> Result<Tensor> {
        let n = tokens.len().min(MAX_CAPTION_LEN).max(1);
        let ids = Tensor::from_vec(
            tokens.iter().take(n).copied().collect::<Vec<_>>(),
            n,
            self.caption_pos.device(),
        )?;
        let mut h = self.caption_emb.forward(&ids)?;
        h = (h + self.caption_pos.narrow(0, 0, n)?)?;
        for blk in &self.text_blocks {
            h = blk.forward(&h)?;
        }
        Ok(h)
    }

    fn encode_timbre(&self, latent: &LatentSeq) -> Result<Tensor> {
        let x = latent
            .to_tensor(self.caption_pos.device())?
            .transpose(0, 1)?
            .unsqueeze(0)?
            .contiguous()?; // (1, D, T)
        let mut h = x;
        for conv in &self.timbre_convs {
            h = conv.forward(&h)?;
            h = candle_nn::ops::silu(&h)?;
        }
        let pooled = h.mean(2)?; // (1, width)
        Ok(self.timbre_out.forward(&pooled)?)
    }

    /// Builds the embedded cross-attention context for one sample.
    pub fn embed(&self, inputs: &CondInputs) -> Result<ConditionBundle> {
        let d = self.config.width;
        let caption = if inputs.null_caption || inputs.caption_tokens.is_empty() {
            self.null_caption.clone()
        } else {
            self.encode_caption(&inputs.caption_tokens)?
        };
        let timbre = match (&inputs.timbre_latent, inputs.null_timbre) {
            (Some(latent), false) => self.encode_timbre(latent)?,
            _ => self.null_timbre.clone(),
        };
        let lyrics = if inputs.null_lyrics || inputs.lyric_tokens.is_empty() {
            self.null_lyrics.clone()
        } else {
            for &t in &inputs.lyric_tokens {
                if t as usize >= self.config.lyric_vocab {
                    return Err(DitError::Contract(format!("lyric token {t} out of vocab")));
                }
            }
            let ids = Tensor::from_vec(
                inputs.lyric_tokens.clone(),
                inputs.lyric_tokens.len(),
                self.caption_pos.device(),
            )?;
            self.lyric_emb.forward(&ids)?
        };

        let lc = caption.dim(0)?;
        let lt = timbre.dim(0)?;
        let ll = lyrics.dim(0)?;
        let caption = caption.broadcast_add(&self.seg_emb.narrow(0, 0, 1)?)?;
        let timbre = timbre.broadcast_add(&self.seg_emb.narrow(0, 1, 1)?)?;
        let lyrics = lyrics.broadcast_add(&self.seg_emb.narrow(0, 2, 1)?)?;
        let context = Tensor::cat(&[&caption, &timbre, &lyrics], 0)?;
        debug_assert_eq!(context.dims2()?, (lc + lt + ll, d));
        Ok(ConditionBundle {
            context,
            lyric_range: (lc + lt, lc + lt + ll),
            null_flags: (inputs.null_caption, inputs.null_lyrics, inputs.null_timbre),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn tokenizer_covers_caption_words() {
        let tok = CaptionTokenizer::new();
        let ids = tok.encode("A techno track at 128 bpm in C# minor, featuring kick, bass and vocal.");
        assert!(!ids.contains(&CAPTION_UNK), "{ids:?}");
        assert!(tok.vocab_size() > 150);
    }

    #[test]
    fn embed_context_layout() {
        let dev = Device::Cpu;
        let cfg = DiTConfig { width: 64, heads: 4, kv_heads: 2, layers: 2, text_layers: 1, ..Default::default() };
        let tok = CaptionTokenizer::new();
        let mut params = Params::new();
        let mut rng = TensorRng::new(0, &dev);
        let enc = CondEncoders::build(&cfg, tok.vocab_size(), &mut params, &mut rng).unwrap();
        let inputs = CondInputs::new(tok.encode("a house track at 120 bpm"), vec![3, 5, 7]);
        let bundle = enc.embed(&inputs).unwrap();
        let (s, d) = bundle.context.dims2().unwrap();
        assert_eq!(d, 64);
        assert_eq!(s, 6 + 1 + 3); // caption words + timbre slot + lyrics
        assert_eq!(bundle.lyric_range, (7, 10));
    }

    #[test]
    fn null_flags_use_learned_constants() {
        let dev = Device::Cpu;
        let cfg = DiTConfig { width: 64, heads: 4, kv_heads: 2, layers: 2, text_layers: 1, ..Default::default() };
        let tok = CaptionTokenizer::new();
        let mut params = Params::new();
        let mut rng = TensorRng::new(1, &dev);
        let enc = CondEncoders::build(&cfg, tok.vocab_size(), &mut params, &mut rng).unwrap();
        let inputs = CondInputs::new(tok.encode("a house track"), vec![1]).all_null();
        let bundle = enc.embed(&inputs).unwrap();
        assert_eq!(bundle.context.dims2().unwrap().0, 3);
        // Learned null constants are not all-zero.
        let norm = bundle.context.sqr().unwrap().sum_all().unwrap().to_scalar::<f32>().unwrap();
        assert!(norm > 0.0);
    }
}
