import { test } from 'node:test';
import assert from 'node:assert/strict';
import { Scan } from './formats';
import { getModel, imageGridValues, listModelNames, pointEmbeddings, renderRangeImage } from './model';

function makeScan(rows: number[][]): Scan {
  const n = rows.length;
  const points = new Float64Array(3 * n);
  const intensity = new Float64Array(n);
  rows.forEach(([x, y, z, i], idx) => {
    points[3 * idx] = x;
    points[3 * idx + 1] = y;
    points[3 * idx + 2] = z;
    intensity[idx] = i;
  });
  return { n, points, intensity };
}

const SCAN = makeScan([
  [1, 2, 0.5, 0.1],
  [-3, 4, -1, 0.9],
  [10, 0, 2, 0.4],
]);

test('model registry resolves and rejects names', () => {
  assert.ok(listModelNames().includes('stub-vit'));
  assert.equal(getModel('stub-vit').pointDim, 96);
  assert.throws(() => getModel('resnet'), /unknown model/);
});

test('point embeddings are bounded, finite, and one row per point', () => {
  const model = getModel('stub-vit');
  const values = pointEmbeddings(SCAN, model, 11);
  assert.equal(values.length, SCAN.n * model.pointDim);
  for (const v of values) {
    assert.ok(Number.isFinite(v));
    assert.ok(Math.abs(v) <= 1);
  }
});

test('point embeddings are deterministic', () => {
  const model = getModel('stub-vit');
  const a = pointEmbeddings(SCAN, model, 11);
  const b = pointEmbeddings(SCAN, model, 11);
  assert.deepEqual(Array.from(a), Array.from(b));
});

test('layer and model change the embedding', () => {
  const vit = getModel('stub-vit');
  const base = pointEmbeddings(SCAN, vit, 11);
  const otherLayer = pointEmbeddings(SCAN, vit, 12);
  assert.notDeepEqual(Array.from(base), Array.from(otherLayer));

  const pointnet = getModel('stub-pointnet');
  const otherModel = pointEmbeddings(SCAN, pointnet, 11);
  assert.notEqual(otherModel.length, base.length);
});

test('embeddings depend only on point values, preserving scan order', () => {
  const model = getModel('stub-pointnet');
  const swapped = makeScan([
    [-3, 4, -1, 0.9],
    [1, 2, 0.5, 0.1],
    [10, 0, 2, 0.4],
  ]);
  const base = pointEmbeddings(SCAN, model, 3);
  const other = pointEmbeddings(swapped, model, 3);
  const d = model.pointDim;
  assert.deepEqual(Array.from(other.slice(0, d)), Array.from(base.slice(d, 2 * d)));
  assert.deepEqual(Array.from(other.slice(d, 2 * d)), Array.from(base.slice(0, d)));
  assert.deepEqual(Array.from(other.slice(2 * d)), Array.from(base.slice(2 * d)));
});

test('range image has the requested shape and hits the right cells', () => {
  const image = renderRangeImage(SCAN, 32, 64);
  assert.equal(image.rows, 32);
  assert.equal(image.cols, 64);
  assert.equal(image.data.length, 32 * 64 * 3);

  // a single point straight along +x at zero elevation lands mid-image
  const single = makeScan([[5, 0, 0, 0.5]]);
  const one = renderRangeImage(single, 32, 64);
  const pixel = 16 * 64 + 32;
  assert.equal(one.data[pixel * 3], 5); // mean depth
  assert.equal(one.data[pixel * 3 + 1], 0.5); // mean intensity
  assert.equal(one.data[pixel * 3 + 2], Math.log1p(1)); // hit count
  const total = one.data.reduce((acc, v) => acc + v, 0);
  assert.equal(total, 5 + 0.5 + Math.log1p(1)); // every other pixel stays zero
});

test('empty scan renders an all-zero image', () => {
  const image = renderRangeImage(makeScan([]), 8, 8);
  assert.ok(image.data.every((v) => v === 0));
});

test('grid dims are the floor of image dims over the patch scale', () => {
  const model = getModel('stub-vit');
  const image = renderRangeImage(SCAN, 50, 70);
  const grid = imageGridValues(image, model, 11, 16);
  assert.equal(grid.rows, 3);
  assert.equal(grid.cols, 4);
  assert.equal(grid.dim, model.gridDim);
  assert.equal(grid.values.length, 3 * 4 * model.gridDim);
  for (const v of grid.values) {
    assert.ok(Number.isFinite(v));
  }
});

test('grid values are deterministic and layer dependent', () => {
  const model = getModel('stub-pointnet');
  const image = renderRangeImage(SCAN, model.imageRows, model.imageCols);
  const a = imageGridValues(image, model, 3, model.patchScale);
  const b = imageGridValues(image, model, 3, model.patchScale);
  const c = imageGridValues(image, model, 4, model.patchScale);
  assert.deepEqual(Array.from(a.values), Array.from(b.values));
  assert.notDeepEqual(Array.from(a.values), Array.from(c.values));
});

test('grid rejects a bad patch scale', () => {
  const model = getModel('stub-vit');
  const image = renderRangeImage(SCAN, 32, 32);
  assert.throws(() => imageGridValues(image, model, 11, 0), /patch scale/);
  assert.throws(() => imageGridValues(image, model, 11, 2.5), /patch scale/);
});
