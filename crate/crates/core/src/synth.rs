//! Deterministic synthetic egocentric sequences.
//!
//! A scene is a static textured background with the wearer's two hands in
//! the lower half of the frame. Each hand is a skin-coloured ellipse attached
//! to a sleeve-coloured forearm that runs to the bottom-left (left hand) or
//! bottom-right (right hand) frame border. During an interaction block the
//! hand holds a striped object and moves; otherwise it rests. Detections are
//! the padded hand boxes with positional jitter, occasional dropouts and
//! occasional false positives on the background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::Label;
use crate::imaging::BinaryMask;
use crate::ingest::{DetectionRecord, LabelRecord};
use crate::types::{angle, BoundingBox, FrameImage, Laterality};

pub const SKIN_TONES: [[u8; 3]; 3] = [[224, 172, 140], [214, 160, 128], [236, 190, 160]];
const OBJECT_COLOURS: [[[u8; 3]; 2]; 4] = [
    [[40, 150, 70], [230, 230, 60]],
    [[40, 150, 190], [20, 40, 90]],
    [[120, 60, 160], [240, 240, 240]],
    [[30, 30, 30], [90, 200, 120]],
];

/// A cool-toned sleeve about as bright as the given skin, so the forearm
/// reads as one uniform band in grayscale while staying out of the skin
/// model.
pub fn sleeve_for(skin: [u8; 3]) -> [u8; 3] {
    let l = 0.299 * skin[0] as f64 + 0.587 * skin[1] as f64 + 0.114 * skin[2] as f64 - 5.0;
    [clamp_u8(l - 17.0), clamp_u8(l), clamp_u8(l + 25.0)]
}

/// Sequence geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub fps: f64,
    /// Probability that a true hand has no detection in a frame.
    pub dropout: f64,
    /// Probability of a false-positive box per frame.
    pub false_positive: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 192,
            frames: 480,
            fps: 30.0,
            dropout: 0.03,
            false_positive: 0.15,
        }
    }
}

/// Per-subject script.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectScript {
    pub id: String,
    pub skin: [u8; 3],
    /// Target share of frames in which each hand interacts.
    pub left_fraction: f64,
    pub right_fraction: f64,
    pub seed: u64,
}

/// Ground truth of one rendered hand.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedHand {
    pub laterality: Laterality,
    /// Tight box around the palm ellipse.
    pub palm_box: BoundingBox,
    pub interacting: bool,
}

/// A generated subject: frames, detector output, labels and ground truth.
#[derive(Clone, Debug)]
pub struct SynthSequence {
    pub subject: String,
    pub fps: f64,
    pub frames: Vec<FrameImage>,
    pub detections: Vec<DetectionRecord>,
    pub labels: Vec<LabelRecord>,
    pub hands: Vec<Vec<RenderedHand>>,
}

/// Three subjects with differing interaction shares per hand.
pub fn bundled_scripts(seed: u64) -> Vec<SubjectScript> {
    let shares = [(0.30, 0.65), (0.55, 0.25), (0.75, 0.50)];
    shares
        .iter()
        .enumerate()
        .map(|(i, &(l, r))| SubjectScript {
            id: format!("subject{}", i + 1),
            skin: SKIN_TONES[i % SKIN_TONES.len()],
            left_fraction: l,
            right_fraction: r,
            seed: seed.wrapping_mul(1000).wrapping_add(i as u64),
        })
        .collect()
}

pub fn bundled_study(cfg: &SynthConfig, seed: u64) -> Vec<SynthSequence> {
    bundled_scripts(seed).iter().map(|s| generate_subject(s, cfg)).collect()
}

/// Interaction schedule with blocks of at least `min_block` frames separated
/// by idle gaps of at least `min_block` frames.
pub fn schedule(frames: usize, fraction: f64, min_block: usize, rng: &mut impl Rng) -> Vec<bool> {
    let total = ((fraction.clamp(0.0, 1.0) * frames as f64).round() as usize).min(frames);
    let mut out = vec![false; frames];
    if total == 0 {
        return out;
    }
    let idle = frames - total;
    let max_by_len = (total / min_block).max(1);
    let max_by_gaps = idle / min_block + 1;
    let k = rng.gen_range(1..=max_by_len.min(max_by_gaps).min(3));
    let mut blocks = vec![total / k; k];
    blocks[0] += total % k;
    // k + 1 gaps; inner gaps need min_block each
    let inner = (k - 1) * min_block;
    let spare = idle - inner.min(idle);
    let mut cuts: Vec<usize> = (0..2).map(|_| rng.gen_range(0..=spare)).collect();
    cuts.sort();
    let lead = cuts[0];
    let extra_inner = cuts[1] - cuts[0];
    let mut pos = lead;
    for (i, b) in blocks.iter().enumerate() {
        out[pos..pos + b].iter_mut().for_each(|v| *v = true);
        pos += b;
        if i + 1 < k {
            pos += min_block + if i == 0 { extra_inner } else { 0 };
        }
    }
    out
}

fn hash(x: usize, y: usize, salt: u64) -> f64 {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ salt;
    h ^= h >> 31;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 29;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Static cool-toned textured background.
pub fn background(width: usize, height: usize, fps: f64, salt: u64) -> FrameImage {
    let mut f = FrameImage::filled(0, fps, width, height, [0, 0, 0]).expect("positive size");
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let wave = (fx / 7.0).sin() * (fy / 9.0).cos() + 0.5 * ((fx + 2.0 * fy) / 13.0).sin();
            let n = hash(x, y, salt) - 0.5;
            let base = [70.0, 100.0, 135.0];
            let rgb = [
                clamp_u8(base[0] + 18.0 * wave + 60.0 * n),
                clamp_u8(base[1] + 25.0 * wave + 80.0 * n),
                clamp_u8(base[2] + 35.0 * wave + 90.0 * n),
            ];
            f.set_rgb(x, y, rgb);
        }
    }
    f
}

/// Paints a bar of the given width from `(x0, y0)` along `deg` to the border.
pub fn paint_arm(frame: &mut FrameImage, from: (f64, f64), deg: f64, width: f64, rgb: [u8; 3]) {
    let (ux, uy) = angle::direction(deg);
    let half = width / 2.0;
    for y in 0..frame.height() {
        for x in 0..frame.width() {
            let (dx, dy) = (x as f64 + 0.5 - from.0, y as f64 + 0.5 - from.1);
            let along = dx * ux + dy * uy;
            let across = (dx * -uy + dy * ux).abs();
            if along >= 0.0 && across <= half {
                frame.set_rgb(x, y, rgb);
            }
        }
    }
}

/// Paints a filled ellipse and returns its tight box. Pixel centres inside
/// the ellipse are painted; `shade` adds per-pixel texture.
pub fn paint_ellipse(frame: &mut FrameImage, c: (f64, f64), a: f64, b: f64, rgb: [u8; 3], shade: f64, salt: u64) -> Option<BoundingBox> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    let ys = ((c.1 - b).floor().max(0.0) as usize)..((c.1 + b).ceil().min(frame.height() as f64) as usize);
    let xs = ((c.0 - a).floor().max(0.0) as usize)..((c.0 + a).ceil().min(frame.width() as f64) as usize);
    for y in ys {
        for x in xs.clone() {
            let (dx, dy) = ((x as f64 + 0.5 - c.0) / a, (y as f64 + 0.5 - c.1) / b);
            if dx * dx + dy * dy <= 1.0 {
                let n = shade * (hash(x, y, salt) - 0.5);
                frame.set_rgb(x, y, rgb.map(|v| clamp_u8(v as f64 + n)));
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
    }
    (x1 > x0).then(|| BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
}

/// Pixels whose centres fall inside the ellipse, as a full-frame mask.
pub fn ellipse_mask(width: usize, height: usize, c: (f64, f64), a: f64, b: f64) -> BinaryMask {
    BinaryMask::from_fn(width, height, |x, y| {
        let (dx, dy) = ((x as f64 + 0.5 - c.0) / a, (y as f64 + 0.5 - c.1) / b);
        dx * dx + dy * dy <= 1.0
    })
}

/// Diagonally striped rectangle centred on `c`.
fn paint_object(frame: &mut FrameImage, c: (f64, f64), w: f64, h: f64, colours: [[u8; 3]; 2]) {
    let x0 = (c.0 - w / 2.0).round().max(0.0) as usize;
    let y0 = (c.1 - h / 2.0).round().max(0.0) as usize;
    let x1 = ((c.0 + w / 2.0).round() as usize).min(frame.width());
    let y1 = ((c.1 + h / 2.0).round() as usize).min(frame.height());
    for y in y0..y1 {
        for x in x0..x1 {
            // stripes fixed to the object so they move with it
            let u = (x as f64 - c.0) + (y as f64 - c.1);
            let k = (u / 4.0).floor().rem_euclid(2.0) as usize;
            frame.set_rgb(x, y, colours[k]);
        }
    }
}

/// Pads a box by `frac` of its size per side and clips it to the frame.
pub fn pad_box(b: &BoundingBox, frac: f64, width: usize, height: usize) -> BoundingBox {
    let px = (frac * b.w as f64).round() as usize;
    let py = (frac * b.h as f64).round() as usize;
    let x0 = b.x.saturating_sub(px);
    let y0 = b.y.saturating_sub(py);
    let x1 = (b.right() + px).min(width);
    let y1 = (b.bottom() + py).min(height);
    BoundingBox::new(x0, y0, x1 - x0, y1 - y0)
}

struct HandRig {
    laterality: Laterality,
    base: (f64, f64),
    arm_deg: f64,
    a: f64,
    b: f64,
    schedule: Vec<bool>,
    phase: f64,
    period: f64,
    object: Vec<usize>,
}

pub fn generate_subject(script: &SubjectScript, cfg: &SynthConfig) -> SynthSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let bg = background(cfg.width, cfg.height, cfg.fps, script.seed);
    let scale = cfg.width as f64 / 256.0;
    let mut rigs = Vec::new();
    for (laterality, fraction, bx, arm) in [
        (Laterality::Left, script.left_fraction, 0.30, 315.0),
        (Laterality::Right, script.right_fraction, 0.70, 225.0),
    ] {
        let schedule = schedule(cfg.frames, fraction, (4.0 * cfg.fps) as usize, &mut rng);
        // one object per interaction block
        let mut object = Vec::with_capacity(cfg.frames);
        let mut current = rng.gen_range(0..OBJECT_COLOURS.len());
        for t in 0..cfg.frames {
            if schedule[t] && (t == 0 || !schedule[t - 1]) {
                current = rng.gen_range(0..OBJECT_COLOURS.len());
            }
            object.push(current);
        }
        rigs.push(HandRig {
            laterality,
            base: (bx * w + rng.gen_range(-6.0..6.0) * scale, 0.58 * h + rng.gen_range(-6.0..6.0) * scale),
            arm_deg: arm + rng.gen_range(-12.0..12.0),
            a: rng.gen_range(13.0..16.0) * scale,
            b: rng.gen_range(16.0..20.0) * scale,
            schedule,
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            period: rng.gen_range(28.0..44.0),
            object,
        });
    }
    let mut frames = Vec::with_capacity(cfg.frames);
    let mut detections = Vec::new();
    let mut labels = Vec::new();
    let mut hands = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let mut frame = bg.clone();
        frame.index = t;
        frame.timestamp_s = t as f64 / cfg.fps;
        let mut rendered = Vec::new();
        for rig in &rigs {
            let active = rig.schedule[t];
            let amp = if active { 7.0 * scale } else { 0.0 };
            let s = std::f64::consts::TAU * t as f64 / rig.period + rig.phase;
            let c = (rig.base.0 + amp * s.sin(), rig.base.1 + 0.6 * amp * (1.3 * s).cos());
            let (ux, uy) = angle::direction(rig.arm_deg);
            let wrist = (c.0 + 0.6 * rig.b * ux, c.1 + 0.6 * rig.b * uy);
            paint_arm(&mut frame, wrist, rig.arm_deg, 2.2 * rig.a, sleeve_for(script.skin));
            let palm = paint_ellipse(&mut frame, c, rig.a, rig.b, script.skin, 2.0, script.seed ^ t as u64)
                .expect("palm is inside the frame");
            if active {
                let colours = OBJECT_COLOURS[rig.object[t]];
                paint_object(&mut frame, (c.0, c.1 - 0.75 * rig.b), 2.4 * rig.a, 0.9 * rig.b, colours);
            }
            rendered.push(RenderedHand {
                laterality: rig.laterality,
                palm_box: palm,
                interacting: active,
            });
            labels.push(LabelRecord {
                frame_index: t,
                laterality: rig.laterality,
                label: Label::from_bool(active),
            });
            if !rng.gen_bool(cfg.dropout) {
                let jx = rng.gen_range(-2.0..=2.0);
                let jy = rng.gen_range(-2.0..=2.0);
                let b = pad_box(&palm, 0.2, cfg.width, cfg.height);
                let mut rec = DetectionRecord::from_box(t, &b, rng.gen_range(0.7..1.0));
                rec.x = (rec.x + jx).max(0.0);
                rec.y = (rec.y + jy).max(0.0);
                rec.hand = Some(true);
                detections.push(rec);
            }
        }
        if rng.gen_bool(cfg.false_positive) {
            let bw = rng.gen_range(24.0..40.0) * scale;
            let bh = rng.gen_range(28.0..44.0) * scale;
            let x = rng.gen_range(0.0..w - bw);
            let y = rng.gen_range(0.0..0.35 * h);
            detections.push(DetectionRecord {
                frame_index: t,
                x: x.floor(),
                y: y.floor(),
                w: bw.round(),
                h: bh.round(),
                confidence: rng.gen_range(0.3..0.7),
                hand: Some(false),
            });
        }
        frames.push(frame);
        hands.push(rendered);
    }
    SynthSequence {
        subject: script.id.clone(),
        fps: cfg.fps,
        frames,
        detections,
        labels,
        hands,
    }
}

/// A uniform bar on i.i.d. noisy ground, leaving the centre of a
/// `box_w` x `box_h` box at `deg`. Returns the frame and the box.
pub fn arm_bar_scene(width: usize, height: usize, box_w: usize, box_h: usize, deg: f64, rng: &mut impl Rng) -> (FrameImage, BoundingBox) {
    let mut f = FrameImage::filled(0, 30.0, width, height, [0, 0, 0]).expect("positive size");
    for y in 0..height {
        for x in 0..width {
            let v = rng.gen_range(50u8..=150);
            f.set_rgb(x, y, [v, v, v]);
        }
    }
    let bbox = BoundingBox::centred_at(width as f64 / 2.0, height as f64 / 2.0, box_w, box_h, width, height);
    // forearm as wide as the box, a little brighter than the ground's mean
    paint_arm(&mut f, bbox.centre(), deg, box_w as f64, [130, 130, 130]);
    (f, bbox)
}

/// A skin ellipse with a sleeve on a textured background, the detector box
/// around it and the ellipse's full-frame mask.
pub fn ellipse_scene(width: usize, height: usize, rng: &mut impl Rng) -> (FrameImage, BoundingBox, BinaryMask) {
    let salt = rng.gen();
    let mut f = background(width, height, 30.0, salt);
    let a = rng.gen_range(0.05..0.08) * width as f64;
    let b = a * rng.gen_range(1.1..1.4);
    let c = (
        rng.gen_range(0.3..0.7) * width as f64,
        rng.gen_range(0.35..0.6) * height as f64,
    );
    let arm = if rng.gen_bool(0.5) { rng.gen_range(290.0..340.0) } else { rng.gen_range(200.0..250.0) };
    let (ux, uy) = angle::direction(arm);
    let tone = SKIN_TONES[rng.gen_range(0..SKIN_TONES.len())];
    paint_arm(&mut f, (c.0 + 0.6 * b * ux, c.1 + 0.6 * b * uy), arm, 2.2 * a, sleeve_for(tone));
    let palm = paint_ellipse(&mut f, c, a, b, tone, 2.0, salt).expect("inside");
    let bbox = pad_box(&palm, rng.gen_range(0.15..0.3), width, height);
    (f, bbox, ellipse_mask(width, height, c, a, b))
}
