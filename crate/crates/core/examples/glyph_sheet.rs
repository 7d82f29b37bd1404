use puppetgan::domains::{render_glyph, sample_real, AttributeVector, DomainSpec};

fn main() {
    let synth = DomainSpec::synthetic_default(32);
    let real = DomainSpec::real_proxy_default(32);
    let n = 32usize;
    let rows = 4;
    let cols = 10;
    let mut sheet = vec![0u8; rows * cols * n * n];
    let mut put = |r: usize, c: usize, img: &ndarray::Array2<f64>| {
        for i in 0..n {
            for j in 0..n {
                let v = ((img[[i, j]] + 1.0) / 2.0 * 255.0) as u8;
                sheet[(r * n + i) * cols * n + c * n + j] = v;
            }
        }
    };
    for class in 0..10u8 {
        let p = AttributeVector { class_id: class, rotation_deg: 0.0, size_scale: 1.0, stroke_width: 1.8, offset_xy: (0.0, 0.0) };
        put(0, class as usize, &render_glyph(&p, &synth, 0).unwrap().pixels);
        let p2 = AttributeVector { class_id: class, rotation_deg: -30.0 + class as f64 * 7.0, size_scale: 0.7 + class as f64 * 0.06, stroke_width: 1.8, offset_xy: (0.0, 0.0) };
        put(1, class as usize, &render_glyph(&p2, &synth, 0).unwrap().pixels);
        put(2, class as usize, &render_glyph(&p, &real, class as u64 + 100).unwrap().pixels);
        put(3, class as usize, &sample_real(class as u64, &real, None).unwrap().pixels);
    }
    image::save_buffer("/tmp/glyphs.png", &sheet, (cols * n) as u32, (rows * n) as u32, image::ColorType::L8).unwrap();
    println!("wrote /tmp/glyphs.png");
}
