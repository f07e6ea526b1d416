use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use scanclass::features::extract_features;
use scanclass::imaging::{binarize_otsu, otsu_threshold, resize_area_average};
use scanclass::ocr_model::{logreg_cost_grad, DesignMatrix};
use scanclass::pipeline::{segment, training_set_from_manifest, Page};
use scanclass::segmentation::find_blobs;
use scanclass::synth::{render_training_sheet, wrap_words, RenderStyle, SAMPLE_TEXT};
use scanclass::text_diff::{compare_texts, myers_diff};
use scanclass::textclass::{classify_text, train_nb, Document};
use scanclass::{BlobManifest, GridConfig, TextPipeline};

fn noisy() -> RenderStyle {
    RenderStyle {
        jitter: 2,
        noise: 0.15,
        seed: 11,
        ..RenderStyle::default()
    }
}

fn imaging(c: &mut Criterion) {
    let sheet = render_training_sheet(&GridConfig::default(), &noisy()).unwrap();
    let hist = sheet.histogram();
    c.bench_function("otsu_threshold", |b| b.iter(|| otsu_threshold(black_box(&hist))));
    c.bench_function("binarize_sheet", |b| b.iter(|| binarize_otsu(black_box(&sheet))));
    c.bench_function("resize_28x44_to_20x20", |b| {
        let glyph = sheet.crop(20, 20, 28, 44).unwrap();
        b.iter(|| resize_area_average(black_box(&glyph), 20, 20).unwrap())
    });
}

fn segmentation(c: &mut Criterion) {
    let grid = GridConfig::default();
    let page = Page::from_gray(render_training_sheet(&grid, &RenderStyle::default()).unwrap());
    c.bench_function("find_blobs_sheet", |b| b.iter(|| find_blobs(black_box(&page.binary), 15)));
    c.bench_function("segment_grid_sheet", |b| {
        b.iter(|| segment(black_box(&page), 15, Some(&grid)).unwrap())
    });
    let blobs = segment(&page, 15, Some(&grid)).unwrap();
    c.bench_function("extract_features", |b| {
        b.iter(|| extract_features(&page.gray, &page.binary, black_box(&blobs[40])).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let grid = GridConfig::default();
    let page = Page::from_gray(render_training_sheet(&grid, &RenderStyle::default()).unwrap());
    let blobs = segment(&page, 15, Some(&grid)).unwrap();
    let manifest = BlobManifest::new("sheet.png", page.width(), page.height(), blobs);
    let ts = training_set_from_manifest(&page, &manifest, &grid.alphabet).unwrap();
    let x = DesignMatrix::with_bias(ts.rows(), ts.dim());
    let y: Vec<f64> = ts.labels().iter().map(|&l| f64::from(l == 0)).collect();
    let theta = vec![0.01; x.cols()];
    c.bench_function("logreg_cost_grad_312x1201", |b| {
        b.iter(|| logreg_cost_grad(black_box(&theta), &x, &y, 0.1).unwrap())
    });
}

fn text(c: &mut Criterion) {
    let lines = wrap_words(SAMPLE_TEXT, 40);
    let original = lines.join("\n");
    let garbled: String = original
        .chars()
        .enumerate()
        .map(|(i, ch)| if i % 7 == 3 { 'X' } else { ch })
        .collect();
    c.bench_function("myers_diff_359_chars", |b| {
        b.iter(|| myers_diff(black_box(&original), black_box(&garbled)))
    });
    c.bench_function("compare_texts_61_words", |b| {
        b.iter(|| compare_texts(black_box(&original), black_box(&garbled)).unwrap())
    });

    let docs: Vec<Document> = (0..200)
        .map(|i| Document {
            doc_id: i.to_string(),
            text: format!("{} word{} common text number {}", if i % 2 == 0 { "alpha" } else { "beta" }, i % 13, i),
            label: Some(if i % 2 == 0 { "A" } else { "B" }.to_string()),
        })
        .collect();
    let model = train_nb(&docs, &TextPipeline::default()).unwrap();
    c.bench_function("nb_classify_sample_text", |b| {
        b.iter(|| classify_text(&model, black_box(SAMPLE_TEXT)))
    });
}

criterion_group!(benches, imaging, segmentation, training, text);
criterion_main!(benches);
