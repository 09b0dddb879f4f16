/** Minimal virtual-node layer.
 *
 * Views build plain VNode trees so their structure and event handlers can be
 * asserted in tests without a browser; `mount` realizes the tree against the
 * real DOM in the console itself.
 */

export type Handler = (...args: unknown[]) => void;

export interface VNode {
  tag: string;
  props: Record<string, unknown>;
  children: (VNode | string)[];
}

export function h(
  tag: string,
  props: Record<string, unknown> | null = null,
  ...children: (VNode | string | null | undefined | false)[]
): VNode {
  return {
    tag,
    props: props ?? {},
    children: children.filter((c): c is VNode | string => c !== null && c !== undefined && c !== false),
  };
}

export function text(node: VNode): string {
  return node.children
    .map((child) => (typeof child === "string" ? child : text(child)))
    .join("");
}

export function findAll(node: VNode, predicate: (n: VNode) => boolean): VNode[] {
  const hits: VNode[] = [];
  const walk = (n: VNode) => {
    if (predicate(n)) hits.push(n);
    for (const child of n.children) {
      if (typeof child !== "string") walk(child);
    }
  };
  walk(node);
  return hits;
}

export function byClass(node: VNode, className: string): VNode[] {
  return findAll(node, (n) => {
    const cls = n.props["class"];
    return typeof cls === "string" && cls.split(/\s+/).includes(className);
  });
}

export function byTestId(node: VNode, id: string): VNode | undefined {
  return findAll(node, (n) => n.props["data-testid"] === id)[0];
}

export function click(node: VNode): void {
  const handler = node.props["onClick"];
  if (typeof handler !== "function") {
    throw new Error(`node <${node.tag}> has no onClick handler`);
  }
  (handler as Handler)();
}

/** Realize a VNode tree as DOM (browser runtime only). */
export function mount(node: VNode, doc: Document = document): HTMLElement {
  const el = doc.createElement(node.tag);
  for (const [key, value] of Object.entries(node.props)) {
    if (key === "onClick" && typeof value === "function") {
      el.addEventListener("click", value as EventListener);
    } else if (key === "class") {
      el.className = String(value);
    } else if (value !== undefined && value !== null && typeof value !== "function") {
      el.setAttribute(key.replace(/[A-Z]/g, (m) => `-${m.toLowerCase()}`), String(value));
    }
  }
  for (const child of node.children) {
    if (typeof child === "string") {
      el.appendChild(doc.createTextNode(child));
    } else {
      el.appendChild(mount(child, doc));
    }
  }
  return el;
}
