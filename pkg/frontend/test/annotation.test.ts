// Blinded annotation flow against the real review service: three synthetic
// annotators complete a 50-item stratified session; the live kappa shown in
// the console must equal the offline statistics-module value computed on
// the exported label matrix.

import assert from 'node:assert/strict';
import { after, before, test } from 'node:test';

import { AnnotationFlow } from '../src/annotation.js';
import { ConsoleApi } from '../src/api.js';
import { byClass, StubElement, stubDoc } from './stub_dom.js';
import {
  makeAnnotationItems,
  offlineAgreement,
  startService,
  type RunningService,
} from './service.js';

let service: RunningService;
let api: ConsoleApi;

before(async () => {
  service = await startService({ items: makeAnnotationItems(60) });
  api = new ConsoleApi(service.base);
});

after(() => service.stop());

function makeFlow(session: string, annotator: string) {
  const root = new StubElement('main');
  return { flow: new AnnotationFlow(api, stubDoc, root, session, annotator), root };
}

test('three annotators complete a 50-item session; live kappa equals offline', async () => {
  const { session, items } = await api.createSession(
    'equivalence',
    { A: 15, B: 20, C: 15 },
    7,
  );
  assert.equal(items, 50);

  // a1 and a2 label everything equivalent; a3 dissents on every third card,
  // so kappa is non-trivial (neither 1 nor undefined)
  let lastRendered: AnnotationFlow | null = null;
  for (const annotator of ['a1', 'a2', 'a3']) {
    const { flow } = makeFlow(session, annotator);
    await flow.loadNext();
    let index = 0;
    while (!flow.finished) {
      const dissent = annotator === 'a3' && index % 3 === 0;
      await flow.label(dissent ? 'not_equivalent' : 'equivalent');
      index += 1;
    }
    assert.equal(flow.labeled, 50);
    lastRendered = flow;
  }

  const live = await api.agreement(session);
  assert.equal(live.items_complete, 50);
  assert.deepEqual(live.raters, ['a1', 'a2', 'a3']);

  const exported = await api.exportLabels(session);
  assert.equal(exported.items.length, 50);
  const offline = offlineAgreement(exported);
  assert.ok(live.kappa !== null);
  assert.ok(Math.abs(live.kappa! - offline.kappa) < 1e-12);
  assert.ok(Math.abs(live.percent_agreement! - offline.percent_agreement) < 1e-12);

  // the completion screen renders the service's numbers, not recomputations
  assert.ok(lastRendered);
  const panelText = lastRendered.renderedText();
  assert.match(panelText, new RegExp(`kappa ${offline.kappa.toFixed(3)}`));
  assert.match(panelText, /Export label matrix/);
});

test('agreement panel refreshes after each label', async () => {
  const { session } = await api.createSession('equivalence', { A: 2, B: 2, C: 2 }, 11);
  const one = makeFlow(session, 'b1');
  await one.flow.loadNext();
  while (!one.flow.finished) await one.flow.label('equivalent');

  const two = makeFlow(session, 'b2');
  await two.flow.loadNext();
  const seen: number[] = [];
  while (!two.flow.finished) {
    await two.flow.label('equivalent');
    seen.push(two.flow.agreementStats?.items_complete ?? -1);
  }
  // with two raters, completed-item count grows as b2 catches up to b1
  assert.deepEqual(seen, [1, 2, 3, 4, 5, 6]);
});

test('duplicate label advances the queue instead of blocking', async () => {
  const { session } = await api.createSession('equivalence', { A: 1, B: 1 }, 3);
  const first = makeFlow(session, 'c1');
  await first.flow.loadNext();
  const firstItem = first.flow.card?.item;
  assert.ok(firstItem);
  // label the same item out-of-band, then through the flow: 409 path
  await api.label(session, firstItem, 'equivalent', 'c1');
  await first.flow.label('equivalent');
  assert.notEqual(first.flow.card?.item, firstItem);
});

test('keyboard labels map to e/n', async () => {
  const { session } = await api.createSession('equivalence', { A: 1 }, 5);
  const { flow } = makeFlow(session, 'd1');
  await flow.loadNext();
  await flow.handleKey('e');
  assert.ok(flow.finished);
  const exported = await api.exportLabels(session);
  assert.deepEqual(exported.items, []); // single rater: no complete matrix yet
  assert.deepEqual(exported.raters, ['d1']);
});

test('completion screen exposes the export link', async () => {
  const { session } = await api.createSession('equivalence', { A: 1 }, 9);
  const { flow, root } = makeFlow(session, 'e1');
  await flow.loadNext();
  await flow.label('equivalent');
  assert.ok(flow.finished);
  const link = byClass(root, 'export');
  assert.ok(link);
  assert.equal(link.attributes['href'], `/labels/${session}`);
});

test('polling timer refreshes the panel', async () => {
  const { session } = await api.createSession('equivalence', { A: 2 }, 13);
  const { flow } = makeFlow(session, 'f1');
  await flow.loadNext();
  flow.startPolling(30);
  await new Promise((resolve) => setTimeout(resolve, 120));
  flow.stopPolling();
  assert.ok(flow.agreementStats !== null);
});
