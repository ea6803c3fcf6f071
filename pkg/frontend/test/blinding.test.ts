// Blinding: neither the annotation payload nor the rendered DOM may carry
// the stratum or either script's verdict, even though the stored items do.

import assert from 'node:assert/strict';
import { after, before, test } from 'node:test';

import { AnnotationFlow } from '../src/annotation.js';
import { ConsoleApi } from '../src/api.js';
import { StubElement, stubDoc } from './stub_dom.js';
import { makeAnnotationItems, startService, type RunningService } from './service.js';

const FORBIDDEN_KEYS = ['stratum', 'original_verdict', 'patched_verdict'];

let service: RunningService;
let api: ConsoleApi;

before(async () => {
  service = await startService({ items: makeAnnotationItems(12) });
  api = new ConsoleApi(service.base);
});

after(() => service.stop());

test('queue payload contains value fields and no verdict fields', async () => {
  const { session } = await api.createSession('equivalence', { A: 2, B: 2, C: 2 }, 1);
  const response = await api.annotationQueue(session, 'a1');
  assert.ok(!('done' in response));
  const keys = Object.keys(response);
  for (const required of ['gt_values', 'pred_values', 'description']) {
    assert.ok(keys.includes(required), `payload must include ${required}`);
  }
  for (const forbidden of FORBIDDEN_KEYS) {
    assert.ok(!keys.includes(forbidden), `payload must not include ${forbidden}`);
  }
});

test('rendered DOM never mentions strata or script verdicts', async () => {
  const { session } = await api.createSession('equivalence', { A: 2, B: 2, C: 2 }, 2);
  const root = new StubElement('main');
  const flow = new AnnotationFlow(api, stubDoc, root, session, 'a1');
  await flow.refreshAgreement();
  await flow.loadNext();
  while (!flow.finished) {
    const text = flow.renderedText().toLowerCase();
    for (const forbidden of FORBIDDEN_KEYS.concat(['stratum a', 'stratum b', 'stratum c'])) {
      assert.ok(!text.includes(forbidden), `rendered text leaked '${forbidden}'`);
    }
    const attributeValues = root
      .findAll(() => true)
      .flatMap((node) => Object.entries(node.attributes).flat())
      .join(' ')
      .toLowerCase();
    for (const forbidden of FORBIDDEN_KEYS) {
      assert.ok(!attributeValues.includes(forbidden), `attributes leaked '${forbidden}'`);
    }
    await flow.label('equivalent');
  }
});

test('labels offered are exactly the two equivalence labels', async () => {
  const { session } = await api.createSession('equivalence', { A: 1 }, 3);
  const response = await api.annotationQueue(session, 'a1');
  assert.ok(!('done' in response));
  assert.deepEqual((response as { labels: string[] }).labels, [
    'equivalent',
    'not_equivalent',
  ]);
});
