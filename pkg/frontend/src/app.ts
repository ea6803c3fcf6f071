// Browser bootstrap: picks the workflow from the query string, persists
// only the session id across reloads, and binds the keyboard.
//
//   index.html?mode=triage
//   index.html?mode=annotation&annotator=a1
//
// The service origin defaults to the page origin; override with ?api=.

import { AnnotationFlow } from './annotation.js';
import { ConsoleApi } from './api.js';
import { TriageFlow } from './triage.js';

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const mode = params.get('mode') ?? 'triage';
  const base = params.get('api') ?? window.location.origin;
  const api = new ConsoleApi(base);
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app container');

  const storageKey = `veribench-console:${mode}:session`;
  let session = params.get('session') ?? window.localStorage.getItem(storageKey) ?? '';

  if (mode === 'annotation') {
    if (!session) {
      const quotas = params.get('quotas'); // e.g. "A=15,B=20,C=15"
      const parsed: Record<string, number> = {};
      for (const pair of (quotas ?? '').split(',')) {
        const [stratum, count] = pair.split('=');
        if (stratum && count) parsed[stratum] = Number(count);
      }
      const created = await api.createSession(
        'equivalence',
        Object.keys(parsed).length ? parsed : undefined,
        Number(params.get('seed') ?? '0'),
      );
      session = created.session;
    }
    window.localStorage.setItem(storageKey, session);
    const annotator = params.get('annotator') ?? 'anonymous';
    const flow = new AnnotationFlow(api, document, root as never, session, annotator);
    document.addEventListener('keydown', (event) => void flow.handleKey(event.key));
    await flow.refreshAgreement();
    await flow.loadNext();
    flow.startPolling();
    return;
  }

  if (!session) {
    session = (await api.createSession('taxonomy')).session;
  }
  window.localStorage.setItem(storageKey, session);
  const reviewer = params.get('reviewer') ?? 'anonymous';
  const flow = new TriageFlow(api, document, root as never, session, reviewer);
  document.addEventListener('keydown', (event) => void flow.handleKey(event.key));
  await flow.loadNext();
}

void boot();
