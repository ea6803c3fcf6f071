// Structural DOM layer: the console renders against these narrow
// interfaces, so node tests can drive the flows with a lightweight stub
// instead of a browser.

export interface ElementLike {
  tagName: string;
  textContent: string;
  className: string;
  children: ElementLike[];
  attributes: Record<string, string>;
  appendChild(child: ElementLike): void;
  setAttribute(name: string, value: string): void;
  addEventListener(event: string, handler: (event: unknown) => void): void;
  remove(): void;
}

export interface DocLike {
  createElement(tag: string): ElementLike;
}

export interface NodeProps {
  class?: string;
  text?: string;
  attrs?: Record<string, string>;
  onClick?: () => void;
}

export function h(
  doc: DocLike,
  tag: string,
  props: NodeProps = {},
  children: ElementLike[] = [],
): ElementLike {
  const node = doc.createElement(tag);
  if (props.class) node.className = props.class;
  if (props.text !== undefined) node.textContent = props.text;
  for (const [name, value] of Object.entries(props.attrs ?? {})) {
    node.setAttribute(name, value);
  }
  if (props.onClick) node.addEventListener('click', props.onClick);
  return children.reduce((parent, child) => (parent.appendChild(child), parent), node);
}

export function clear(node: ElementLike): void {
  for (const child of [...node.children]) {
    child.remove();
  }
  node.textContent = '';
}

/** Collect all rendered text under a node (for assertions and search). */
export function allText(node: ElementLike): string {
  const own = node.textContent ?? '';
  return [own, ...node.children.map(allText)].join(' ');
}
