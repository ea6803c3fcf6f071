// Minimal DOM stand-in satisfying the console's structural interfaces, so
// flows can be driven and inspected under node without a browser.

import type { DocLike, ElementLike } from '../src/dom.js';

export class StubElement implements ElementLike {
  textContent = '';
  className = '';
  children: StubElement[] = [];
  attributes: Record<string, string> = {};
  parent: StubElement | null = null;
  private handlers: Record<string, Array<(event: unknown) => void>> = {};

  constructor(readonly tagName: string) {}

  appendChild(child: ElementLike): void {
    const stub = child as StubElement;
    stub.parent = this;
    this.children.push(stub);
  }

  setAttribute(name: string, value: string): void {
    this.attributes[name] = value;
  }

  addEventListener(event: string, handler: (event: unknown) => void): void {
    (this.handlers[event] ??= []).push(handler);
  }

  remove(): void {
    if (this.parent) {
      this.parent.children = this.parent.children.filter((c) => c !== this);
      this.parent = null;
    }
  }

  click(): void {
    for (const handler of this.handlers['click'] ?? []) handler({});
  }

  /** Depth-first search over the subtree. */
  find(predicate: (node: StubElement) => boolean): StubElement | null {
    if (predicate(this)) return this;
    for (const child of this.children) {
      const hit = child.find(predicate);
      if (hit) return hit;
    }
    return null;
  }

  findAll(predicate: (node: StubElement) => boolean, out: StubElement[] = []): StubElement[] {
    if (predicate(this)) out.push(this);
    for (const child of this.children) child.findAll(predicate, out);
    return out;
  }
}

export const stubDoc: DocLike = {
  createElement: (tag: string) => new StubElement(tag),
};

export function byClass(root: StubElement, className: string): StubElement | null {
  return root.find((node) => node.className.split(' ').includes(className));
}
