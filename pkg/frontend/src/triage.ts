// Taxonomy triage: review one analysis report at a time, pick one of the
// 14 taxonomy leaves (grouped by attribution), and submit. Keyboard-only
// operation: arrows move the picker, Enter submits, "s" jumps to the
// analyst's suggestion. Service rejections (409/422) are surfaced inline
// and never reset the picker.

import { ApiError, ConsoleApi } from './api.js';
import { allText, clear, DocLike, ElementLike, h } from './dom.js';
import { ALL_LEAVES, isDone, TAXONOMY_GROUPS, TriageCard } from './types.js';

export class TriageFlow {
  card: TriageCard | null = null;
  selected: string | null = null;
  finished = false;
  classified = 0;
  lastError = '';

  constructor(
    private readonly api: ConsoleApi,
    private readonly doc: DocLike,
    private readonly root: ElementLike,
    private readonly session: string,
    private readonly reviewer: string,
  ) {}

  async loadNext(): Promise<void> {
    const response = await this.api.triageQueue(this.session);
    if (isDone(response)) {
      this.card = null;
      this.finished = true;
      this.render();
      return;
    }
    this.card = response;
    this.selected = response.suggested_category;
    this.lastError = '';
    this.render();
  }

  select(leaf: string): void {
    if (ALL_LEAVES.includes(leaf)) {
      this.selected = leaf;
      this.render();
    }
  }

  moveSelection(delta: number): void {
    const index = this.selected ? ALL_LEAVES.indexOf(this.selected) : -1;
    const next = Math.min(Math.max(index + delta, 0), ALL_LEAVES.length - 1);
    this.selected = ALL_LEAVES[next] ?? null;
    this.render();
  }

  canSubmit(): boolean {
    return this.card !== null && this.selected !== null;
  }

  async submit(): Promise<void> {
    if (!this.card || !this.selected) return; // blocked client-side
    try {
      await this.api.classify({
        task_id: this.card.task_id,
        model_name: this.card.model_name,
        column: this.card.column,
        category: this.selected,
        reviewer: this.reviewer,
      });
      this.classified += 1;
      await this.loadNext();
    } catch (error) {
      if (error instanceof ApiError) {
        this.lastError = `${error.status}: ${String(error.body['error'] ?? 'rejected')}`;
        this.render(); // picker state retained
        return;
      }
      throw error;
    }
  }

  async handleKey(key: string): Promise<void> {
    if (key === 'ArrowDown' || key === 'j') this.moveSelection(1);
    else if (key === 'ArrowUp' || key === 'k') this.moveSelection(-1);
    else if (key === 's' && this.card?.suggested_category) this.select(this.card.suggested_category);
    else if (key === 'Enter') await this.submit();
  }

  render(): void {
    clear(this.root);
    if (this.finished) {
      this.root.appendChild(
        h(this.doc, 'div', { class: 'done', text: `Triage complete: ${this.classified} classified.` }),
      );
      return;
    }
    const card = this.card;
    if (!card) return;

    const samples = card.evidence.samples ?? [];
    const rows = samples.map((sample) =>
      h(this.doc, 'tr', {}, [
        h(this.doc, 'td', { text: String(sample.row) }),
        h(this.doc, 'td', { class: 'gt', text: sample.gt }),
        h(this.doc, 'td', { class: 'pred', text: sample.pred }),
      ]),
    );

    const picker = TAXONOMY_GROUPS.flatMap((group) => [
      h(this.doc, 'div', { class: 'group', text: group.group }),
      ...group.leaves.map((leaf) =>
        h(this.doc, 'div', {
          class: `leaf${leaf === this.selected ? ' selected' : ''}${
            leaf === card.suggested_category ? ' suggested' : ''
          }`,
          text: leaf,
          attrs: { 'data-leaf': leaf, role: 'option' },
          onClick: () => this.select(leaf),
        }),
      ),
    ]);

    this.root.appendChild(
      h(this.doc, 'div', { class: 'card triage' }, [
        h(this.doc, 'div', {
          class: 'column-id',
          text: `${card.task_id} / ${card.model_name} / ${card.column}`,
        }),
        h(this.doc, 'div', { class: 'progress', text: `${card.remaining} remaining` }),
        h(this.doc, 'p', { class: 'diagnosis', text: card.diagnosis }),
        h(this.doc, 'div', {
          class: 'stats',
          text: `verified=${card.verified} best_match_rate=${card.best_match_rate.toFixed(4)}`,
        }),
        h(this.doc, 'table', { class: 'samples' }, [
          h(this.doc, 'tr', {}, [
            h(this.doc, 'th', { text: 'row' }),
            h(this.doc, 'th', { text: 'ground truth' }),
            h(this.doc, 'th', { text: 'predicted' }),
          ]),
          ...rows,
        ]),
        h(this.doc, 'div', { class: 'picker', attrs: { role: 'listbox' } }, picker),
        h(this.doc, 'button', {
          class: 'submit',
          text: 'Classify (Enter)',
          attrs: this.canSubmit() ? {} : { disabled: 'disabled' },
          onClick: () => void this.submit(),
        }),
        ...(this.lastError
          ? [h(this.doc, 'div', { class: 'error', text: this.lastError })]
          : []),
      ]),
    );
  }

  renderedText(): string {
    return allText(this.root);
  }
}
