// Blinded equivalence annotation: one column pair at a time, label it
// equivalent (key "e") or not_equivalent (key "n"), with a live agreement
// panel refreshed after every label and on a poll timer. The card renders
// only the blinded payload fields (values and description); every panel
// statistic is the service's own number, never recomputed client-side.

import { ApiError, ConsoleApi } from './api.js';
import { allText, clear, DocLike, ElementLike, h } from './dom.js';
import { AgreementStats, AnnotationCard, isDone } from './types.js';

const POLL_MS = 2000;

export class AnnotationFlow {
  card: AnnotationCard | null = null;
  agreementStats: AgreementStats | null = null;
  finished = false;
  exportPath = '';
  labeled = 0;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly api: ConsoleApi,
    private readonly doc: DocLike,
    private readonly root: ElementLike,
    private readonly session: string,
    private readonly annotator: string,
  ) {}

  startPolling(intervalMs: number = POLL_MS): void {
    this.stopPolling();
    this.timer = setInterval(() => void this.refreshAgreement(), intervalMs);
  }

  stopPolling(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  async loadNext(): Promise<void> {
    const response = await this.api.annotationQueue(this.session, this.annotator);
    if (isDone(response)) {
      this.card = null;
      this.finished = true;
      this.exportPath = response.export ?? '';
      this.stopPolling();
      await this.refreshAgreement();
      return;
    }
    this.card = response;
    this.render();
  }

  async refreshAgreement(): Promise<void> {
    this.agreementStats = await this.api.agreement(this.session);
    this.render();
  }

  async label(value: 'equivalent' | 'not_equivalent'): Promise<void> {
    if (!this.card) return;
    try {
      await this.api.label(this.session, this.card.item, value, this.annotator);
      this.labeled += 1;
    } catch (error) {
      // an already-recorded label means this card is done; advance
      if (!(error instanceof ApiError && error.status === 409)) throw error;
    }
    await this.refreshAgreement();
    await this.loadNext();
  }

  async handleKey(key: string): Promise<void> {
    if (key === 'e') await this.label('equivalent');
    else if (key === 'n') await this.label('not_equivalent');
  }

  private agreementPanel(): ElementLike {
    const stats = this.agreementStats;
    const kappa = stats?.kappa == null ? 'n/a' : stats.kappa.toFixed(3);
    const percent =
      stats?.percent_agreement == null ? 'n/a' : `${stats.percent_agreement.toFixed(1)}%`;
    return h(this.doc, 'div', { class: 'agreement' }, [
      h(this.doc, 'span', { class: 'kappa', text: `kappa ${kappa}` }),
      h(this.doc, 'span', { class: 'percent', text: `agreement ${percent}` }),
      h(this.doc, 'span', {
        class: 'complete',
        text: `${stats?.items_complete ?? 0} fully labeled`,
      }),
    ]);
  }

  render(): void {
    clear(this.root);
    if (this.finished) {
      this.root.appendChild(
        h(this.doc, 'div', { class: 'done' }, [
          h(this.doc, 'div', { text: `Session complete: ${this.labeled} labels recorded.` }),
          h(this.doc, 'a', {
            class: 'export',
            text: 'Export label matrix',
            attrs: { href: this.exportPath || `/labels/${this.session}` },
          }),
          this.agreementPanel(),
        ]),
      );
      return;
    }
    const card = this.card;
    if (!card) return;

    const rows = card.gt_values.map((gt, i) =>
      h(this.doc, 'tr', {}, [
        h(this.doc, 'td', { class: 'gt', text: gt }),
        h(this.doc, 'td', { class: 'pred', text: card.pred_values[i] ?? '' }),
      ]),
    );

    this.root.appendChild(
      h(this.doc, 'div', { class: 'card annotation' }, [
        h(this.doc, 'p', { class: 'description', text: card.description }),
        h(this.doc, 'div', { class: 'progress', text: `${card.remaining} remaining` }),
        h(this.doc, 'table', { class: 'values' }, [
          h(this.doc, 'tr', {}, [
            h(this.doc, 'th', { text: 'ground truth' }),
            h(this.doc, 'th', { text: 'predicted' }),
          ]),
          ...rows,
        ]),
        h(this.doc, 'div', { class: 'buttons' }, [
          h(this.doc, 'button', {
            class: 'equivalent',
            text: 'Equivalent (e)',
            onClick: () => void this.label('equivalent'),
          }),
          h(this.doc, 'button', {
            class: 'not-equivalent',
            text: 'Not equivalent (n)',
            onClick: () => void this.label('not_equivalent'),
          }),
        ]),
        this.agreementPanel(),
      ]),
    );
  }

  renderedText(): string {
    return allText(this.root);
  }
}
