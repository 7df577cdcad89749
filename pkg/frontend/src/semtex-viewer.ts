/**
 * Progressive-enhancement viewer for compiled semantic-TeX pages.
 *
 * Services (all driven by markers the compiler leaves in the page; a page
 * without markers simply gets no behavior):
 *  - click a symbol token (`data-semtex-cd`/`data-semtex-name`) to fetch
 *    its definition from the `/lookup` endpoint and show it in a popup;
 *  - double-click a subterm (any node carrying an `xref` crossref) to
 *    fold it to a placeholder and back;
 *  - press "b" to toggle the display of elidable brackets.
 *
 * The embedded OpenMath annotations are never touched, and fold/toggle
 * are exact involutions on the DOM.
 */

const XHTML_NS = "http://www.w3.org/1999/xhtml";
const MATHML_NS = "http://www.w3.org/1998/Math/MathML";

const HIDE_BRACKETS_CLASS = "semtex-hide-brackets";
const POPUP_CLASS = "semtex-popup";
const FOLD_CLASS = "semtex-fold";

interface ViewerState {
    folds: Map<string, ChildNode[]>;
    pending: AbortController | null;
    popup: Element | null;
}

const states = new WeakMap<Document, ViewerState>();
const attached = new WeakSet<Document>();

function stateFor(doc: Document): ViewerState {
    let state = states.get(doc);
    if (!state) {
        state = { folds: new Map(), pending: null, popup: null };
        states.set(doc, state);
    }
    return state;
}

function ownerDocument(root: Document | Element): Document {
    return root.nodeType === 9 ? (root as Document) : (root as Element).ownerDocument!;
}

/** Base URI of the serving store, recovered from the page's `about` URI. */
export function serverBase(doc: Document): string {
    const about = doc.documentElement?.getAttribute("about") ?? "";
    const cut = about.indexOf("/doc/");
    if (cut > 0) {
        return about.slice(0, cut);
    }
    const location = doc.defaultView?.location;
    return location ? location.origin : "";
}

/**
 * Install the event handlers. Idempotent: attaching twice installs one
 * handler set; nothing in the page is mutated at attach time.
 */
export function attachHandlers(root: Document | Element): void {
    const doc = ownerDocument(root);
    if (attached.has(doc)) {
        return;
    }
    attached.add(doc);
    stateFor(doc);

    doc.addEventListener("click", (event) => {
        const target = event.target as Element | null;
        if (!target) {
            return;
        }
        const symbol = closestWithAttribute(target, "data-semtex-cd");
        if (symbol) {
            event.preventDefault();
            const cd = symbol.getAttribute("data-semtex-cd")!;
            const name = symbol.getAttribute("data-semtex-name") ?? "";
            void lookupDefinition(cd, name, { doc, anchor: symbol });
            return;
        }
        const state = stateFor(doc);
        if (state.popup && !state.popup.contains(target)) {
            dismissPopup(doc);
        }
    });

    doc.addEventListener("dblclick", (event) => {
        const target = event.target as Element | null;
        const subterm = target ? closestWithAttribute(target, "xref") : null;
        if (subterm) {
            event.preventDefault();
            foldSubterm(subterm.getAttribute("xref")!, doc);
        }
    });

    doc.addEventListener("keydown", (event) => {
        const key = (event as KeyboardEvent).key;
        if (key === "Escape") {
            dismissPopup(doc);
        } else if (key === "b" || key === "B") {
            toggleBrackets(doc);
        }
    });
}

function closestWithAttribute(el: Element, attribute: string): Element | null {
    let cur: Element | null = el;
    while (cur) {
        if (cur.hasAttribute && cur.hasAttribute(attribute)) {
            return cur;
        }
        cur = cur.parentElement;
    }
    return null;
}

/**
 * Fetch and show a symbol's definition. A newer click aborts the
 * in-flight request; failures produce a readable notice instead.
 */
export async function lookupDefinition(
    cd: string,
    name: string,
    options: { doc?: Document; anchor?: Element } = {},
): Promise<void> {
    const doc = options.doc ?? document;
    const state = stateFor(doc);
    if (state.pending) {
        state.pending.abort();
    }
    const controller = new AbortController();
    state.pending = controller;
    const base = serverBase(doc);
    const url =
        `${base}/lookup?cd=${encodeURIComponent(cd)}&name=${encodeURIComponent(name)}`;
    let markup: string | null = null;
    let failure = "";
    try {
        const response = await fetch(url, { signal: controller.signal });
        if (response.ok || response.status === 200) {
            markup = await response.text();
        } else if (response.status === 404) {
            failure = `No definition found for ${cd} # ${name}.`;
        } else {
            failure = `Definition lookup failed (${response.status}).`;
        }
    } catch (err) {
        if ((err as Error).name === "AbortError") {
            return; // superseded by a newer click
        }
        failure = "Definition lookup failed: the server is unreachable.";
    } finally {
        if (state.pending === controller) {
            state.pending = null;
        }
    }
    if (controller.signal.aborted) {
        return;
    }
    const popup = buildPopup(doc, options.anchor);
    if (markup !== null) {
        const fragment = sanitizeFragment(markup, doc);
        if (fragment) {
            popup.appendChild(fragment);
        } else {
            popup.appendChild(noticeParagraph(doc, "The server returned an unreadable fragment."));
        }
    } else {
        popup.appendChild(noticeParagraph(doc, failure));
    }
}

function noticeParagraph(doc: Document, text: string): Element {
    const p = doc.createElementNS(XHTML_NS, "p");
    p.setAttribute("class", "semtex-popup-notice");
    p.textContent = text;
    return p;
}

function buildPopup(doc: Document, anchor?: Element): Element {
    dismissPopup(doc);
    const state = stateFor(doc);
    const popup = doc.createElementNS(XHTML_NS, "div");
    popup.setAttribute("class", POPUP_CLASS);
    const close = doc.createElementNS(XHTML_NS, "span");
    close.setAttribute("class", "semtex-popup-close");
    close.textContent = "\u00d7";
    close.addEventListener("click", () => dismissPopup(doc));
    popup.appendChild(close);
    if (anchor && typeof anchor.getBoundingClientRect === "function") {
        const rect = anchor.getBoundingClientRect();
        (popup as HTMLElement).style?.setProperty("left", `${rect.left}px`);
        (popup as HTMLElement).style?.setProperty("top", `${rect.bottom + 4}px`);
    }
    doc.documentElement.appendChild(popup);
    state.popup = popup;
    return popup;
}

export function dismissPopup(doc: Document = document): void {
    const state = stateFor(doc);
    if (state.popup) {
        state.popup.remove();
        state.popup = null;
    }
}

// Lookup responses cross an HTTP boundary, so only a whitelist of inert
// markup survives; everything else (scripts, handlers, ids) is dropped.
const ALLOWED_TAGS = new Set([
    "div", "p", "span", "a", "b", "i", "em", "strong", "code",
    "ul", "ol", "li",
    "math", "semantics", "mrow", "mi", "mo", "mn", "mtext", "msup",
    "annotation-xml", "OMOBJ", "OMA", "OMS", "OMV", "OMI",
]);

const ALLOWED_ATTRIBUTES = new Set([
    "class", "href", "xref", "encoding", "cd", "name", "property",
    "content", "rel", "resource", "about",
]);

export function sanitizeFragment(markup: string, doc: Document): DocumentFragment | null {
    let parsed: Document;
    try {
        parsed = new (doc.defaultView?.DOMParser ?? DOMParser)().parseFromString(
            markup,
            "application/xhtml+xml",
        );
    } catch {
        return null;
    }
    if (!parsed.documentElement || parsed.getElementsByTagName("parsererror").length > 0) {
        return null;
    }
    const fragment = doc.createDocumentFragment();
    const imported = doc.importNode(parsed.documentElement, true);
    scrub(imported);
    fragment.appendChild(imported);
    return fragment;
}

function scrub(el: Element): void {
    for (const child of Array.from(el.children)) {
        if (!ALLOWED_TAGS.has(child.localName)) {
            child.remove();
            continue;
        }
        scrub(child);
    }
    for (const attr of Array.from(el.attributes)) {
        const name = attr.localName;
        if (name.startsWith("data-semtex-")) {
            continue;
        }
        if (!ALLOWED_ATTRIBUTES.has(name) && !name.startsWith("xmlns")) {
            el.removeAttribute(attr.name);
            continue;
        }
        if (name === "href" && !/^https?:/.test(attr.value) && !attr.value.startsWith("/")) {
            el.removeAttribute(attr.name);
        }
    }
}

/**
 * Fold the subterm whose presentation carries the given crossref id down
 * to a placeholder glyph; calling again restores the exact prior DOM.
 * Unknown ids are a no-op.
 */
export function foldSubterm(crossrefId: string, doc: Document = document): void {
    const state = stateFor(doc);
    const selector = `[xref="${crossrefId.replace(/["\\]/g, "\\$&")}"]`;
    const target = doc.querySelector(selector);
    if (!target) {
        return;
    }
    const stored = state.folds.get(crossrefId);
    if (stored) {
        while (target.firstChild) {
            target.removeChild(target.firstChild);
        }
        for (const node of stored) {
            target.appendChild(node);
        }
        state.folds.delete(crossrefId);
        return;
    }
    const children = Array.from(target.childNodes);
    for (const node of children) {
        target.removeChild(node);
    }
    const placeholder = doc.createElementNS(MATHML_NS, "mtext");
    placeholder.setAttribute("class", FOLD_CLASS);
    placeholder.textContent = "\u22ef";
    target.appendChild(placeholder);
    state.folds.set(crossrefId, children);
}

/**
 * Globally hide or show all elidable fences. An involution: the second
 * call restores the document exactly.
 */
export function toggleBrackets(doc: Document = document): void {
    const root = doc.documentElement;
    const cls = root.getAttribute("class");
    const classes = cls ? cls.split(/\s+/).filter(Boolean) : [];
    const index = classes.indexOf(HIDE_BRACKETS_CLASS);
    if (index >= 0) {
        classes.splice(index, 1);
    } else {
        classes.push(HIDE_BRACKETS_CLASS);
    }
    if (classes.length) {
        root.setAttribute("class", classes.join(" "));
    } else {
        root.removeAttribute("class");
    }
}

if (typeof document !== "undefined" && typeof window !== "undefined") {
    const init = () => attachHandlers(document);
    if (document.readyState === "loading") {
        document.addEventListener("DOMContentLoaded", init);
    } else {
        init();
    }
}
